#include "kinex/kernels.hpp"

#include <cmath>

#include "kinex/error.hpp"

namespace kinex {

namespace detail {
void throw_contract(const char* what) { throw ContractViolation(what); }
}  // namespace detail

TradeOutcome trade_commodity(const AgentState& a, const AgentState& b, const TradeDraw& draw, double theta,
                             double global_price) {
  if (!(theta >= 0.0 && theta < 1.0)) detail::throw_contract("price noise theta must lie in [0, 1)");
  if (!(global_price > theta) || !std::isfinite(global_price)) {
    detail::throw_contract("global price must be finite and exceed theta");
  }
  TradeOutcome out = trade_distributed_savings(a, b, draw);
  const double price = draw.price_up ? global_price + theta : global_price - theta;
  // The agent whose money grows sells commodity worth the same amount.
  const double moved = (out.first.money - a.money) / price;
  out.first.commodity = a.commodity - moved;
  out.second.commodity = b.commodity + moved;
  if (out.first.commodity < 0.0 || out.second.commodity < 0.0) {
    return TradeOutcome{a, b, false};
  }
  return out;
}

}  // namespace kinex
