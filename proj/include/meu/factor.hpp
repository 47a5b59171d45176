#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace meu {

using VarId = int;
using Scope = std::vector<VarId>;

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

/// Dense nonnegative table over an ordered scope, stored as log-values.
///
/// Entries are laid out row-major in scope order: the last scope variable
/// varies fastest. A factor with an empty scope is a scalar.
class DiscreteFactor {
 public:
  /// Scalar factor with log-value 0.
  DiscreteFactor();
  DiscreteFactor(Scope scope, std::vector<int> cards,
                 std::vector<double> log_values);

  static DiscreteFactor constant(Scope scope, std::vector<int> cards,
                                 double log_value = 0.0);
  static DiscreteFactor from_values(Scope scope, std::vector<int> cards,
                                    std::span<const double> values);

  const Scope& scope() const { return scope_; }
  const std::vector<int>& cards() const { return cards_; }
  const std::vector<double>& log_values() const { return log_values_; }
  std::vector<double>& mutable_log_values() { return log_values_; }
  std::size_t size() const { return log_values_.size(); }

  double log_value(std::size_t i) const { return log_values_[i]; }
  double value(std::size_t i) const;
  std::vector<double> values() const;

  bool contains(VarId v) const { return position(v) >= 0; }
  /// Position of v in the scope, or -1.
  int position(VarId v) const;
  int card_of(VarId v) const;

  /// Linear index of an assignment given in scope order.
  std::size_t index_of(std::span<const int> assignment) const;
  /// Stride of scope position p.
  std::size_t stride(std::size_t p) const;

 private:
  Scope scope_;
  std::vector<int> cards_;
  std::vector<double> log_values_;
};

enum class ReduceMode { sum, max };

/// Product of factors (sum of log-values); scope is the ordered union.
DiscreteFactor factor_combine(std::span<const DiscreteFactor> factors);
DiscreteFactor factor_product(const DiscreteFactor& a, const DiscreteFactor& b);

/// Eliminates `drop` by log-sum-exp (sum) or entrywise max.
DiscreteFactor factor_reduce(const DiscreteFactor& f, std::span<const VarId> drop,
                             ReduceMode mode);

/// Raises entries to `exponent` and normalizes each slice over `over`.
DiscreteFactor factor_power_normalize(const DiscreteFactor& f,
                                      std::span<const VarId> over,
                                      double exponent);

/// Re-expresses f over a superset scope in the given order (broadcasting).
DiscreteFactor factor_align(const DiscreteFactor& f, const Scope& scope,
                            const std::vector<int>& cards);

/// Marginal of f onto `keep` (in that order); variables of keep must be in f.
DiscreteFactor factor_marginal(const DiscreteFactor& f, const Scope& keep,
                               ReduceMode mode = ReduceMode::sum);

/// Normalizes so that the linear entries sum to one.
DiscreteFactor factor_normalize(const DiscreteFactor& f);

/// log of the sum of the linear entries.
double factor_log_sum(const DiscreteFactor& f);

/// Numerically stable log(sum(exp(v))).
double log_sum_exp(std::span<const double> v);

namespace detail {

/// Odometer over the assignments of `cards`, tracking the linear offset into
/// another table whose per-digit strides are given (0 for absent digits).
class Walker {
 public:
  Walker(const std::vector<int>& cards, std::vector<std::size_t> strides)
      : cards_(cards), strides_(std::move(strides)), digits_(cards.size(), 0) {}

  std::size_t offset() const { return offset_; }

  /// Advances to the next assignment; offset wraps back to 0 after the last.
  void next() {
    for (std::size_t d = cards_.size(); d-- > 0;) {
      if (++digits_[d] < cards_[d]) {
        offset_ += strides_[d];
        return;
      }
      digits_[d] = 0;
      offset_ -= strides_[d] * static_cast<std::size_t>(cards_[d] - 1);
    }
  }

 private:
  const std::vector<int>& cards_;
  std::vector<std::size_t> strides_;
  std::vector<int> digits_;
  std::size_t offset_ = 0;
};

/// Strides of `target` for each variable of `walk` (0 if target lacks it).
std::vector<std::size_t> strides_for(const DiscreteFactor& target,
                                     const Scope& walk);

std::size_t table_size(const std::vector<int>& cards);

}  // namespace detail

}  // namespace meu
