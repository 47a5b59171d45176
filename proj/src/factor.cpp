#include "meu/factor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "meu/errors.hpp"

namespace meu {

namespace detail {

std::size_t table_size(const std::vector<int>& cards) {
  std::size_t n = 1;
  for (int c : cards) n *= static_cast<std::size_t>(c);
  return n;
}

std::vector<std::size_t> strides_for(const DiscreteFactor& target,
                                     const Scope& walk) {
  std::vector<std::size_t> out(walk.size(), 0);
  for (std::size_t d = 0; d < walk.size(); ++d) {
    int p = target.position(walk[d]);
    if (p >= 0) out[d] = target.stride(static_cast<std::size_t>(p));
  }
  return out;
}

}  // namespace detail

namespace {

void check_scope(const Scope& scope, const std::vector<int>& cards) {
  if (scope.size() != cards.size())
    throw ScopeError("scope and cardinality lists differ in length");
  for (std::size_t i = 0; i < scope.size(); ++i) {
    if (cards[i] < 1)
      throw ScopeError("variable " + std::to_string(scope[i]) +
                       " has cardinality < 1");
    for (std::size_t j = 0; j < i; ++j)
      if (scope[j] == scope[i])
        throw ScopeError("variable " + std::to_string(scope[i]) +
                         " repeated in scope");
  }
}

// Ordered union of scopes with cardinality agreement.
void merge_scope(Scope& scope, std::vector<int>& cards, const DiscreteFactor& f) {
  for (std::size_t i = 0; i < f.scope().size(); ++i) {
    VarId v = f.scope()[i];
    auto it = std::find(scope.begin(), scope.end(), v);
    if (it == scope.end()) {
      scope.push_back(v);
      cards.push_back(f.cards()[i]);
    } else if (cards[static_cast<std::size_t>(it - scope.begin())] != f.cards()[i]) {
      throw ScopeError("inconsistent cardinality for variable " +
                       std::to_string(v));
    }
  }
}

}  // namespace

DiscreteFactor::DiscreteFactor() : log_values_(1, 0.0) {}

DiscreteFactor::DiscreteFactor(Scope scope, std::vector<int> cards,
                               std::vector<double> log_values)
    : scope_(std::move(scope)),
      cards_(std::move(cards)),
      log_values_(std::move(log_values)) {
  check_scope(scope_, cards_);
  if (log_values_.size() != detail::table_size(cards_))
    throw ScopeError("table length " + std::to_string(log_values_.size()) +
                     " does not match scope size " +
                     std::to_string(detail::table_size(cards_)));
  for (double v : log_values_)
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw InvalidModelError("factor entry is NaN or +inf");
}

DiscreteFactor DiscreteFactor::constant(Scope scope, std::vector<int> cards,
                                        double log_value) {
  std::size_t n = detail::table_size(cards);
  return DiscreteFactor(std::move(scope), std::move(cards),
                        std::vector<double>(n, log_value));
}

DiscreteFactor DiscreteFactor::from_values(Scope scope, std::vector<int> cards,
                                           std::span<const double> values) {
  std::vector<double> logs(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0 || std::isnan(values[i]))
      throw InvalidModelError("negative or NaN factor entry");
    logs[i] = values[i] == 0.0 ? kLogZero : std::log(values[i]);
  }
  return DiscreteFactor(std::move(scope), std::move(cards), std::move(logs));
}

double DiscreteFactor::value(std::size_t i) const {
  return std::exp(log_values_[i]);
}

std::vector<double> DiscreteFactor::values() const {
  std::vector<double> out(log_values_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_values_[i]);
  return out;
}

int DiscreteFactor::position(VarId v) const {
  for (std::size_t i = 0; i < scope_.size(); ++i)
    if (scope_[i] == v) return static_cast<int>(i);
  return -1;
}

int DiscreteFactor::card_of(VarId v) const {
  int p = position(v);
  if (p < 0) throw ScopeError("variable " + std::to_string(v) + " not in scope");
  return cards_[static_cast<std::size_t>(p)];
}

std::size_t DiscreteFactor::stride(std::size_t p) const {
  std::size_t s = 1;
  for (std::size_t i = scope_.size(); i-- > p + 1;)
    s *= static_cast<std::size_t>(cards_[i]);
  return s;
}

std::size_t DiscreteFactor::index_of(std::span<const int> assignment) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < scope_.size(); ++i)
    idx = idx * static_cast<std::size_t>(cards_[i]) +
          static_cast<std::size_t>(assignment[i]);
  return idx;
}

double log_sum_exp(std::span<const double> v) {
  double m = kLogZero;
  for (double x : v) m = std::max(m, x);
  if (m == kLogZero) return kLogZero;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

DiscreteFactor factor_combine(std::span<const DiscreteFactor> factors) {
  if (factors.empty()) return DiscreteFactor();
  if (factors.size() == 1) return factors[0];
  Scope scope;
  std::vector<int> cards;
  for (const auto& f : factors) merge_scope(scope, cards, f);
  auto out = DiscreteFactor::constant(scope, cards, 0.0);
  auto& vals = out.mutable_log_values();
  for (const auto& f : factors) {
    detail::Walker w(out.cards(), detail::strides_for(f, scope));
    const auto& src = f.log_values();
    for (std::size_t i = 0; i < vals.size(); ++i, w.next())
      vals[i] += src[w.offset()];
  }
  return out;
}

DiscreteFactor factor_product(const DiscreteFactor& a, const DiscreteFactor& b) {
  const DiscreteFactor pair[2] = {a, b};
  return factor_combine(pair);
}

DiscreteFactor factor_reduce(const DiscreteFactor& f, std::span<const VarId> drop,
                             ReduceMode mode) {
  for (VarId v : drop)
    if (!f.contains(v))
      throw ScopeError("cannot eliminate variable " + std::to_string(v) +
                       ": not in scope");
  if (drop.empty()) return f;
  Scope scope;
  std::vector<int> cards;
  for (std::size_t i = 0; i < f.scope().size(); ++i) {
    if (std::find(drop.begin(), drop.end(), f.scope()[i]) != drop.end()) continue;
    scope.push_back(f.scope()[i]);
    cards.push_back(f.cards()[i]);
  }
  auto out = DiscreteFactor::constant(scope, cards, kLogZero);
  auto& dst = out.mutable_log_values();
  const auto& src = f.log_values();
  {
    detail::Walker w(f.cards(), detail::strides_for(out, f.scope()));
    for (std::size_t i = 0; i < src.size(); ++i, w.next())
      dst[w.offset()] = std::max(dst[w.offset()], src[i]);
  }
  if (mode == ReduceMode::max) return out;
  std::vector<double> acc(dst.size(), 0.0);
  detail::Walker w(f.cards(), detail::strides_for(out, f.scope()));
  for (std::size_t i = 0; i < src.size(); ++i, w.next()) {
    double m = dst[w.offset()];
    if (m != kLogZero) acc[w.offset()] += std::exp(src[i] - m);
  }
  for (std::size_t j = 0; j < dst.size(); ++j)
    if (dst[j] != kLogZero) dst[j] += std::log(acc[j]);
  return out;
}

DiscreteFactor factor_power_normalize(const DiscreteFactor& f,
                                      std::span<const VarId> over,
                                      double exponent) {
  if (!(exponent > 0.0))
    throw Error("power normalization needs a positive exponent");
  std::vector<double> powered(f.log_values());
  for (double& v : powered)
    if (v != kLogZero) v *= exponent;
  DiscreteFactor p(f.scope(), f.cards(), std::move(powered));
  DiscreteFactor z = factor_reduce(p, over, ReduceMode::sum);
  for (double v : z.log_values())
    if (v == kLogZero)
      throw DegenerateSliceError("conditioning slice is identically zero");
  auto& vals = p.mutable_log_values();
  detail::Walker w(p.cards(), detail::strides_for(z, p.scope()));
  for (std::size_t i = 0; i < vals.size(); ++i, w.next())
    vals[i] -= z.log_value(w.offset());
  return p;
}

DiscreteFactor factor_align(const DiscreteFactor& f, const Scope& scope,
                            const std::vector<int>& cards) {
  for (std::size_t i = 0; i < f.scope().size(); ++i) {
    auto it = std::find(scope.begin(), scope.end(), f.scope()[i]);
    if (it == scope.end())
      throw ScopeError("align target lacks variable " +
                       std::to_string(f.scope()[i]));
    if (cards[static_cast<std::size_t>(it - scope.begin())] != f.cards()[i])
      throw ScopeError("inconsistent cardinality for variable " +
                       std::to_string(f.scope()[i]));
  }
  if (f.scope() == scope) return f;
  auto out = DiscreteFactor::constant(scope, cards, 0.0);
  auto& vals = out.mutable_log_values();
  detail::Walker w(out.cards(), detail::strides_for(f, scope));
  const auto& src = f.log_values();
  for (std::size_t i = 0; i < vals.size(); ++i, w.next()) vals[i] = src[w.offset()];
  return out;
}

DiscreteFactor factor_marginal(const DiscreteFactor& f, const Scope& keep,
                               ReduceMode mode) {
  Scope drop;
  std::vector<int> keep_cards;
  for (VarId v : keep) keep_cards.push_back(f.card_of(v));
  for (VarId v : f.scope())
    if (std::find(keep.begin(), keep.end(), v) == keep.end()) drop.push_back(v);
  DiscreteFactor r = factor_reduce(f, drop, mode);
  return factor_align(r, keep, keep_cards);
}

double factor_log_sum(const DiscreteFactor& f) { return log_sum_exp(f.log_values()); }

DiscreteFactor factor_normalize(const DiscreteFactor& f) {
  double z = factor_log_sum(f);
  if (z == kLogZero) throw DegenerateSliceError("cannot normalize an all-zero table");
  DiscreteFactor out = f;
  for (double& v : out.mutable_log_values()) v -= z;
  return out;
}

}  // namespace meu
