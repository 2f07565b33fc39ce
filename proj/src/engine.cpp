#include "kinex/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "kinex/burn_in.hpp"
#include "kinex/error.hpp"

namespace kinex {

namespace {

constexpr int kDetectorBinsPerDecade = 4;

double relative_deviation(double actual, double expected) { return std::abs(actual - expected) / expected; }

struct EnsembleOutput {
  std::vector<Accumulators> blocks;
  std::vector<double> richest_series;
  double lambda_max = 0.0;
  double richest_mean = 0.0;
  std::int64_t first_passage = -1;
  double final_max_share = 0.0;
  ConservationAudit audit;
  TradeCounts trades;
  std::int64_t burn_in_detected = 0;
  std::int64_t burn_in_performed = 0;
};

struct Layout {
  std::int64_t groups = 1;
  std::int64_t blocks_per_ensemble = 1;
  std::int64_t ticks = 0;

  std::int64_t group_of(std::int64_t ensemble, std::int64_t block, std::int64_t ensembles) const {
    return ((ensemble * blocks_per_ensemble + block) * groups) / (ensembles * blocks_per_ensemble);
  }
};

Layout make_layout(const SimConfig& c) {
  Layout l;
  l.ticks = c.mc_steps / c.sample_interval;
  if (c.ensembles >= c.jackknife_groups) {
    l.groups = c.jackknife_groups;
    l.blocks_per_ensemble = 1;
  } else {
    l.blocks_per_ensemble = std::min<std::int64_t>((c.jackknife_groups + c.ensembles - 1) / c.ensembles, l.ticks);
    l.groups = std::min<std::int64_t>(c.jackknife_groups, c.ensembles * l.blocks_per_ensemble);
  }
  return l;
}

class EnsembleRunner {
 public:
  EnsembleRunner(const SimConfig& config, const Layout& layout, std::uint64_t index)
      : config_(config), layout_(layout), index_(index), market_(config, index) {}

  EnsembleOutput run() {
    const auto n = static_cast<std::size_t>(config_.agents);
    out_.blocks.assign(static_cast<std::size_t>(layout_.blocks_per_ensemble), Accumulators(config_));
    if (config_.track_richest) {
      richest_ = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (market_.quenched_lambda(i) > market_.quenched_lambda(richest_)) richest_ = i;
      }
      out_.lambda_max = market_.quenched_lambda(richest_);
      out_.richest_series.push_back(market_.agents()[richest_].money);
    }
    if (config_.condensation_threshold) check_condensation();

    if (config_.auto_burn_in) {
      auto_burn_in();
    } else {
      for (std::int64_t s = 0; s < config_.burn_in; ++s) advance();
      out_.burn_in_detected = out_.burn_in_performed = config_.burn_in;
    }

    double richest_sum = 0.0;
    std::int64_t richest_count = 0;
    std::int64_t tick = 0;
    for (std::int64_t s = 1; s <= config_.mc_steps; ++s) {
      advance();
      if (config_.track_richest && step_ % config_.richest_stride == 0) {
        richest_sum += market_.agents()[richest_].money;
        ++richest_count;
      }
      if (s % config_.sample_interval == 0 && tick < layout_.ticks) {
        const std::int64_t block = tick * layout_.blocks_per_ensemble / layout_.ticks;
        sample(out_.blocks[static_cast<std::size_t>(block)]);
        ++tick;
      }
    }
    if (config_.track_richest) out_.richest_mean = richest_count > 0 ? richest_sum / richest_count : 0.0;
    if (config_.condensation_threshold) out_.final_max_share = max_share();
    out_.trades = market_.trades();
    return std::move(out_);
  }

 private:
  void advance() {
    market_.step();
    ++step_;
    if (config_.track_richest && step_ % config_.richest_stride == 0) {
      out_.richest_series.push_back(market_.agents()[richest_].money);
    }
    if (config_.condensation_threshold && out_.first_passage < 0) check_condensation();
  }

  double max_share() const {
    double best = 0.0;
    for (const auto& a : market_.agents()) best = std::max(best, a.money);
    return best / config_.total_money();
  }

  void check_condensation() {
    if (out_.first_passage < 0 && max_share() >= *config_.condensation_threshold) out_.first_passage = step_;
  }

  void auto_burn_in() {
    const AutoBurnIn& a = *config_.auto_burn_in;
    const std::int64_t window =
        a.window_steps > 0 ? a.window_steps
                           : std::max<std::int64_t>(10, (100'000 + config_.agents - 1) / config_.agents);
    const Binning binning = Binning::logarithmic(config_.histogram.min_fraction * config_.money_per_agent,
                                                 config_.total_money(), kDetectorBinsPerDecade);
    BurnInDetector detector(a.threshold, a.consecutive, window);
    while (true) {
      std::vector<double> counts(binning.bins(), 0.0);
      for (std::int64_t s = 0; s < window; ++s) {
        advance();
        for (const auto& agent : market_.agents()) counts[binning.index(agent.money)] += 1.0;
      }
      if (auto found = detector.push(std::move(counts))) {
        out_.burn_in_detected = *found;
        out_.burn_in_performed = step_;
        return;
      }
      if (step_ >= config_.mc_steps) {
        std::ostringstream msg;
        msg << "burn-in did not settle within mc_steps = " << config_.mc_steps << " (ensemble " << index_
            << ", window " << window << " steps, threshold " << a.threshold << "); last window distances:";
        const auto& d = detector.distances();
        for (std::size_t k = d.size() > 5 ? d.size() - 5 : 0; k < d.size(); ++k) msg << ' ' << d[k];
        throw SimulationError(msg.str());
      }
    }
  }

  void sample(Accumulators& acc) {
    const auto agents = market_.agents();
    const double price = config_.global_price();
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const AgentState& a = agents[i];
      acc.money.add(a.money);
      acc.money_sums.add(a.money);
      if (acc.commodity) {
        acc.commodity->add(a.commodity);
        acc.wealth->add(a.money + price * a.commodity);
      }
      if (acc.by_lambda) acc.by_lambda->add(a.lambda, a.money);
    }
    if (acc.difference) {
      RngStream& rng = market_.measurement_rng();
      for (std::size_t k = 0; k < agents.size(); ++k) {
        const auto i = static_cast<std::size_t>(rng.below(agents.size()));
        const auto j = static_cast<std::size_t>(rng.below(agents.size()));
        acc.difference->add(std::abs(agents[i].money - agents[j].money));
      }
    }
    audit();
  }

  void audit() {
    const double dm = relative_deviation(market_.money_sum(), config_.total_money());
    double dc = 0.0;
    if (config_.model == Model::commodity) dc = relative_deviation(market_.commodity_sum(), config_.total_commodity());
    ++out_.audit.checks;
    out_.audit.max_money_deviation = std::max(out_.audit.max_money_deviation, dm);
    out_.audit.max_commodity_deviation = std::max(out_.audit.max_commodity_deviation, dc);
    if (!(dm <= kConservationTolerance) || !(dc <= kConservationTolerance)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "conservation breach in ensemble " << index_ << " at MC step " << step_ << ": money sum "
          << market_.money_sum() << " vs " << config_.total_money();
      if (config_.model == Model::commodity) {
        msg << ", commodity sum " << market_.commodity_sum() << " vs " << config_.total_commodity();
      }
      throw SimulationError(msg.str());
    }
  }

  const SimConfig& config_;
  const Layout& layout_;
  std::uint64_t index_;
  Market market_;
  std::int64_t step_ = 0;
  std::size_t richest_ = 0;
  EnsembleOutput out_;
};

}  // namespace

// ---------------------------------------------------------------------------

void TradeCounts::merge(const TradeCounts& o) {
  attempted += o.attempted;
  rejected += o.rejected;
  max_consecutive_rejections = std::max(max_consecutive_rejections, o.max_consecutive_rejections);
}

Market::Market(const SimConfig& config, std::uint64_t ensemble_index)
    : config_(config),
      dynamics_(config.seed, ensemble_index, StreamPurpose::dynamics),
      measurement_(config.seed, ensemble_index, StreamPurpose::measurement) {
  config.validate();
  const auto n = static_cast<std::size_t>(config.agents);
  agents_.resize(n);
  if (config.initial == InitialCondition::uniform) {
    for (auto& a : agents_) {
      a.money = config.money_per_agent;
      a.commodity = config.commodity_per_agent;
    }
  } else {
    // Uniformly random split of M (and C): normalized exponential variates.
    RngStream rng(config.seed, ensemble_index, StreamPurpose::initial);
    auto spread = [&](auto member, double total) {
      std::vector<double> e(n);
      double sum = 0.0;
      for (auto& x : e) {
        x = -std::log1p(-rng.uniform01());
        sum += x;
      }
      double assigned = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        agents_[i].*member = total * (e[i] / sum);
        assigned += agents_[i].*member;
      }
      agents_[n - 1].*member = std::max(0.0, total - assigned);
    };
    spread(&AgentState::money, config.total_money());
    spread(&AgentState::commodity, config.total_commodity());
  }
  if (config.uses_lambda()) {
    const LambdaDistSpec spec = config.effective_lambda();
    RngStream rng(config.seed, ensemble_index, StreamPurpose::lambda);
    const std::vector<double> lambdas = sample_quenched(spec, n, rng);
    for (std::size_t i = 0; i < n; ++i) agents_[i].lambda = lambdas[i];
    annealed_ = spec.is_annealed();
    if (config.model == Model::uniform_savings) uniform_lambda_ = spec.value;
  }
  livelock_limit_ = 10'000 * static_cast<std::uint64_t>(n);
}

double Market::money_sum() const {
  double s = 0.0;
  for (const auto& a : agents_) s += a.money;
  return s;
}

double Market::commodity_sum() const {
  double s = 0.0;
  for (const auto& a : agents_) s += a.commodity;
  return s;
}

void Market::step() {
  switch (config_.model) {
    case Model::no_savings: return steps<Model::no_savings>();
    case Model::uniform_savings: return steps<Model::uniform_savings>();
    case Model::distributed_savings: return annealed_ ? steps<Model::distributed_savings, true>()
                                                      : steps<Model::distributed_savings>();
    case Model::angle: return steps<Model::angle>();
    case Model::minimum_exchange: return steps<Model::minimum_exchange>();
    case Model::commodity: return annealed_ ? steps<Model::commodity, true>() : steps<Model::commodity>();
  }
}

template <Model M, bool Annealed>
void Market::steps() {
  const auto n = agents_.size();
  for (std::size_t k = 0; k < n; ++k) {
    const auto [i, j] = select_pair(n, dynamics_);
    trade<M, Annealed>(agents_[i], agents_[j]);
  }
  trades_.attempted += n;
}

template <Model M, bool Annealed>
void Market::trade(AgentState& a, AgentState& b) {
  TradeDraw draw;
  if constexpr (M != Model::angle) {
    draw.epsilon = config_.epsilon.random ? dynamics_.uniform01() : config_.epsilon.value;
  }
  TradeOutcome out;
  if constexpr (M == Model::no_savings) {
    out = trade_no_savings(a, b, draw);
  } else if constexpr (M == Model::uniform_savings) {
    out = trade_uniform_savings(a, b, uniform_lambda_, draw);
  } else if constexpr (M == Model::distributed_savings) {
    if constexpr (Annealed) {
      AgentState ta = a, tb = b;
      ta.lambda = sample_annealed(a.lambda, dynamics_);
      tb.lambda = sample_annealed(b.lambda, dynamics_);
      out = trade_distributed_savings(ta, tb, draw);
    } else {
      out = trade_distributed_savings(a, b, draw);
    }
  } else if constexpr (M == Model::angle) {
    draw.angle_direction = dynamics_.coin();
    out = trade_angle(a, b, config_.angle_w, draw);
  } else if constexpr (M == Model::minimum_exchange) {
    out = trade_minimum_exchange(a, b, draw);
  } else {
    draw.price_up = dynamics_.coin();
    AgentState ta = a, tb = b;
    if constexpr (Annealed) {
      ta.lambda = sample_annealed(a.lambda, dynamics_);
      tb.lambda = sample_annealed(b.lambda, dynamics_);
    }
    out = trade_commodity(ta, tb, draw, config_.theta, config_.global_price());
    if (!out.accepted) {
      ++trades_.rejected;
      ++consecutive_rejections_;
      trades_.max_consecutive_rejections = std::max(trades_.max_consecutive_rejections, consecutive_rejections_);
      if (consecutive_rejections_ > livelock_limit_) {
        throw SimulationError("commodity market livelock: " + std::to_string(consecutive_rejections_) +
                              " consecutive rejected trades");
      }
      return;
    }
    consecutive_rejections_ = 0;
    a.commodity = out.first.commodity;
    b.commodity = out.second.commodity;
  }
  a.money = out.first.money;
  b.money = out.second.money;
}

Accumulators::Accumulators(const SimConfig& config) : money(money_binning(config)) {
  if (config.model == Model::commodity) {
    commodity.emplace(commodity_binning(config));
    wealth.emplace(wealth_binning(config));
  }
  if (config.pair_differences) difference.emplace(money_binning(config));
  if (!config.lambda_bins.empty()) by_lambda.emplace(config.lambda_bins, money_binning(config));
}

void Accumulators::merge(const Accumulators& o) {
  money.merge(o.money);
  money_sums.merge(o.money_sums);
  if (commodity) {
    commodity->merge(*o.commodity);
    wealth->merge(*o.wealth);
  }
  if (difference) difference->merge(*o.difference);
  if (by_lambda) by_lambda->merge(*o.by_lambda);
}

Binning money_binning(const SimConfig& c) {
  return Binning::logarithmic(c.histogram.min_fraction * c.money_per_agent, c.total_money(), c.histogram.bins_per_decade);
}

Binning commodity_binning(const SimConfig& c) {
  return Binning::logarithmic(c.histogram.min_fraction * c.commodity_per_agent, c.total_commodity(),
                              c.histogram.bins_per_decade);
}

Binning wealth_binning(const SimConfig& c) {
  // w = m + p0 c, so the mean wealth is twice the mean money.
  return Binning::logarithmic(c.histogram.min_fraction * 2.0 * c.money_per_agent, 2.0 * c.total_money(),
                              c.histogram.bins_per_decade);
}

SimResult run(const SimConfig& config, const RunOptions& options) {
  config.validate();
  const Layout layout = make_layout(config);
  const auto ensembles = static_cast<std::size_t>(config.ensembles);

  SimResult result{config, Accumulators(config), {}, static_cast<std::uint64_t>(layout.ticks), {}, {}, {}, {}, {}};
  result.groups.assign(static_cast<std::size_t>(layout.groups), Accumulators(config));
  result.burn_in.automatic = config.auto_burn_in.has_value();
  if (config.condensation_threshold) result.condensation = CondensationTrack{*config.condensation_threshold, {}, {}};
  if (config.track_richest) result.richest = RichestTrack{config.richest_stride, {}, 0.0, {}, 0.0, {}};

  // Outputs are folded in strictly increasing ensemble order.
  std::vector<std::optional<EnsembleOutput>> pending(ensembles);
  std::size_t next_merge = 0;
  std::mutex mutex;
  std::atomic<std::size_t> next_claim{0};
  std::atomic<bool> failed{false};
  std::vector<std::exception_ptr> errors(ensembles);

  auto fold = [&](std::size_t e, EnsembleOutput& out) {
    for (std::size_t b = 0; b < out.blocks.size(); ++b) {
      const auto g = layout.group_of(static_cast<std::int64_t>(e), static_cast<std::int64_t>(b), config.ensembles);
      result.groups[static_cast<std::size_t>(g)].merge(out.blocks[b]);
    }
    result.audit.checks += out.audit.checks;
    result.audit.max_money_deviation = std::max(result.audit.max_money_deviation, out.audit.max_money_deviation);
    result.audit.max_commodity_deviation =
        std::max(result.audit.max_commodity_deviation, out.audit.max_commodity_deviation);
    result.trades.merge(out.trades);
    result.burn_in.detected.push_back(out.burn_in_detected);
    result.burn_in.performed.push_back(out.burn_in_performed);
    if (result.condensation) {
      result.condensation->first_passage.push_back(out.first_passage);
      result.condensation->final_max_share.push_back(out.final_max_share);
    }
    if (result.richest) {
      auto& r = *result.richest;
      if (r.mean_money.empty()) r.mean_money.assign(out.richest_series.size(), 0.0);
      for (std::size_t k = 0; k < out.richest_series.size(); ++k) r.mean_money[k] += out.richest_series[k];
      r.mean_lambda_max += out.lambda_max;
      r.ensemble_means.push_back(out.richest_mean);
    }
  };

  auto worker = [&]() {
    while (!failed.load()) {
      const std::size_t e = next_claim.fetch_add(1);
      if (e >= ensembles) return;
      try {
        EnsembleOutput out = EnsembleRunner(config, layout, e).run();
        std::lock_guard<std::mutex> lock(mutex);
        pending[e] = std::move(out);
        while (next_merge < ensembles && pending[next_merge]) {
          fold(next_merge, *pending[next_merge]);
          pending[next_merge].reset();
          ++next_merge;
        }
      } catch (...) {
        errors[e] = std::current_exception();
        failed.store(true);
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(ensembles)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  for (const auto& g : result.groups) result.pooled.merge(g);
  if (result.richest) {
    auto& r = *result.richest;
    const auto e = static_cast<double>(config.ensembles);
    for (double& v : r.mean_money) v /= e;
    r.mean_lambda_max /= e;
    double s = 0.0;
    for (double v : r.ensemble_means) s += v;
    r.long_run_mean = s / e;
    if (auto k = relaxation_time(r.mean_money, r.long_run_mean, 0.1)) {
      r.relaxation_steps = static_cast<std::int64_t>(*k) * r.stride;
    }
  }
  return result;
}

}  // namespace kinex
