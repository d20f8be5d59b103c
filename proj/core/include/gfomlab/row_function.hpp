#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gfom {

// A row-separate map R^{rows x arity} -> R^{rows}. Row `i` of the output is
// eval(i, h) where h holds the i-th row of the consumed history, oldest first.
// `partial(i, h, w)` is d eval / d h[w].
class RowFunction {
 public:
  using Eval = std::function<double(std::size_t row, std::span<const double> hist)>;
  using Partial =
      std::function<double(std::size_t row, std::span<const double> hist, std::size_t which)>;

  RowFunction() = default;
  RowFunction(std::size_t arity, Eval eval, Partial partial, std::string name = {},
              bool coordinate_free = false, std::optional<double> lipschitz_hint = {});

  std::size_t arity() const noexcept { return arity_; }
  const std::string& name() const noexcept { return name_; }
  // True when eval and partial ignore the row index.
  bool coordinate_free() const noexcept { return coordinate_free_; }
  // True for the identically-zero map; engines skip it.
  bool is_zero() const noexcept { return zero_; }
  std::optional<double> lipschitz_hint() const noexcept { return lipschitz_; }

  double operator()(std::size_t row, std::span<const double> hist) const {
    return eval_(row, hist);
  }
  double partial(std::size_t row, std::span<const double> hist, std::size_t which) const {
    return partial_(row, hist, which);
  }

  // Applies the map to the leading `arity` iterates of `history`.
  Eigen::VectorXd apply(const std::vector<Eigen::VectorXd>& history) const;

  static RowFunction zero(std::size_t arity);
  // Row-independent constant value.
  static RowFunction constant(std::size_t arity, double value);
  // Row-dependent constant c_i.
  static RowFunction constant_vector(std::size_t arity, Eigen::VectorXd values);
  // f(h[arity-1]) applied to the latest iterate.
  static RowFunction of_last(std::size_t arity, std::function<double(double)> f,
                             std::function<double(double)> df, std::string name = {},
                             std::optional<double> lipschitz_hint = {});
  static RowFunction identity_last(std::size_t arity);
  static RowFunction tanh_last(std::size_t arity);
  // sum_w weights[w] * h[w] + offset.
  static RowFunction affine(std::vector<double> weights, double offset = 0.0);
  // Row-dependent affine map: sum_w weights[w](i) * h[w] + offset(i).
  static RowFunction affine_rows(std::vector<Eigen::VectorXd> weights, Eigen::VectorXd offset);

  // Reads h[index_map[p]] into slot p of this function's history; rows are
  // shifted by -row_offset before evaluation. Result has arity `new_arity`.
  RowFunction remapped(std::size_t new_arity, std::vector<std::size_t> index_map,
                       std::size_t row_offset = 0) const;
  // Uses `top` on rows [0, split) and `bottom` on rows [split, ...), both seeing
  // the same history. Arities must agree.
  static RowFunction blocks(std::size_t split, RowFunction top, RowFunction bottom);
  // Pointwise a * f + b * g (same arity).
  static RowFunction linear_combination(double a, const RowFunction& f, double b,
                                        const RowFunction& g);

 private:
  std::size_t arity_ = 0;
  Eval eval_;
  Partial partial_;
  std::string name_;
  bool coordinate_free_ = false;
  bool zero_ = false;
  std::optional<double> lipschitz_;
};

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  bool passed = true;
};

// Central differences with h = 1e-5 * max(1, |x|) at `probes` standard-normal
// points (scaled by `scale`) on rows drawn from [0, rows). The comparison is
// |analytic - fd| <= tol * max(1, |analytic|, |fd|).
FdReport finite_difference_check(const RowFunction& fn, std::size_t rows, std::uint64_t seed,
                                 std::size_t probes = 100, double tol = 1e-5,
                                 double scale = 1.0);

}  // namespace gfom
