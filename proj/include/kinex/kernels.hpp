#pragma once

// Two-agent trade rules. Every kernel is a pure function of its arguments and
// conserves the pair's money: the first agent's new holding is computed from
// the rule and the second agent receives the exact remainder of the pair sum.

#include <algorithm>

namespace kinex {

/// One trader. `commodity` is only meaningful in commodity-market runs.
struct AgentState {
  double money = 0.0;
  double lambda = 0.0;  ///< saving propensity, 0 <= lambda < 1
  double commodity = 0.0;

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

/// Stochastic inputs of one trade, drawn by the engine.
struct TradeDraw {
  double epsilon = 0.5;          ///< sharing fraction in [0, 1]
  bool angle_direction = false;  ///< true: the first agent takes from the second
  bool price_up = true;          ///< commodity price 1 + theta (true) or 1 - theta
};

struct TradeOutcome {
  AgentState first;
  AgentState second;
  bool accepted = true;
};

namespace detail {

[[noreturn]] void throw_contract(const char* what);

inline void check_epsilon(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw_contract("epsilon must lie in [0, 1]");
}

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw_contract("lambda must lie in [0, 1)");
}

// Splits `total` so the first agent gets `first_share` (clamped into [0, total]).
inline TradeOutcome split(const AgentState& a, const AgentState& b, double total, double first_share) {
  TradeOutcome out{a, b, true};
  out.first.money = std::clamp(first_share, 0.0, total);
  out.second.money = total - out.first.money;
  return out;
}

// lambda_a m_a + eps [(1 - lambda_a) m_a + (1 - lambda_b) m_b]; every savings
// variant funnels through here so the reductions between them are bitwise.
inline TradeOutcome savings_core(const AgentState& a, const AgentState& b, double lambda_a,
                                 double lambda_b, double epsilon) {
  const double total = a.money + b.money;
  const double pool = (1.0 - lambda_a) * a.money + (1.0 - lambda_b) * b.money;
  return split(a, b, total, lambda_a * a.money + epsilon * pool);
}

}  // namespace detail

/// Random split of the pair's whole money.
inline TradeOutcome trade_no_savings(const AgentState& a, const AgentState& b, const TradeDraw& draw) {
  detail::check_epsilon(draw.epsilon);
  const double total = a.money + b.money;
  return detail::split(a, b, total, draw.epsilon * total);
}

/// Both agents keep the same fraction `lambda` and randomly split the rest.
inline TradeOutcome trade_uniform_savings(const AgentState& a, const AgentState& b, double lambda,
                                          const TradeDraw& draw) {
  detail::check_lambda(lambda);
  detail::check_epsilon(draw.epsilon);
  return detail::savings_core(a, b, lambda, lambda, draw.epsilon);
}

/// Each agent keeps its own fraction `lambda`; lambdas are never modified.
inline TradeOutcome trade_distributed_savings(const AgentState& a, const AgentState& b,
                                              const TradeDraw& draw) {
  detail::check_lambda(a.lambda);
  detail::check_lambda(b.lambda);
  detail::check_epsilon(draw.epsilon);
  return detail::savings_core(a, b, a.lambda, b.lambda, draw.epsilon);
}

/// One-parameter inequality process: the winner (picked by angle_direction)
/// takes the fraction `w` of the loser's money.
inline TradeOutcome trade_angle(const AgentState& a, const AgentState& b, double w, const TradeDraw& draw) {
  if (!(w > 0.0 && w < 1.0)) detail::throw_contract("angle transfer fraction w must lie in (0, 1)");
  const double total = a.money + b.money;
  if (draw.angle_direction) {
    return detail::split(a, b, total, total - (b.money - w * b.money));
  }
  return detail::split(a, b, total, a.money - w * a.money);
}

/// Only twice the poorer agent's money is at stake; each agent stakes min(m_a, m_b).
inline TradeOutcome trade_minimum_exchange(const AgentState& a, const AgentState& b,
                                           const TradeDraw& draw) {
  detail::check_epsilon(draw.epsilon);
  const double total = a.money + b.money;
  const double stake = std::min(a.money, b.money);
  return detail::split(a, b, total, (a.money - stake) + draw.epsilon * (stake + stake));
}

/// Money moves by the distributed-savings rule (which reduces bitwise to the
/// uniform and no-savings rules); commodity moves the opposite way at price
/// p0 +/- theta, p0 being the global price M/C. Infeasible trades are rejected
/// and return the inputs unchanged.
TradeOutcome trade_commodity(const AgentState& a, const AgentState& b, const TradeDraw& draw, double theta,
                             double global_price = 1.0);

}  // namespace kinex
