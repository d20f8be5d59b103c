#include "gfomlab/row_function.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gfomlab/error.hpp"
#include "gfomlab/rng.hpp"

namespace gfom {

RowFunction::RowFunction(std::size_t arity, Eval eval, Partial partial, std::string name,
                         bool coordinate_free, std::optional<double> lipschitz_hint)
    : arity_(arity),
      eval_(std::move(eval)),
      partial_(std::move(partial)),
      name_(std::move(name)),
      coordinate_free_(coordinate_free),
      lipschitz_(lipschitz_hint) {
  if (!eval_ || !partial_) throw ConfigError("RowFunction requires eval and partial");
}

Eigen::VectorXd RowFunction::apply(const std::vector<Eigen::VectorXd>& history) const {
  if (history.size() < arity_) throw ConfigError("history shorter than function arity");
  const Eigen::Index rows = history.empty() ? 0 : history.front().size();
  Eigen::VectorXd out(rows);
  if (zero_) {
    out.setZero();
    return out;
  }
  std::vector<double> buf(arity_);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (std::size_t w = 0; w < arity_; ++w) buf[w] = history[w](i);
    out(i) = eval_(static_cast<std::size_t>(i), buf);
  }
  return out;
}

RowFunction RowFunction::zero(std::size_t arity) {
  RowFunction f(
      arity, [](std::size_t, std::span<const double>) { return 0.0; },
      [](std::size_t, std::span<const double>, std::size_t) { return 0.0; }, "zero", true, 0.0);
  f.zero_ = true;
  return f;
}

RowFunction RowFunction::constant(std::size_t arity, double value) {
  if (value == 0.0) return zero(arity);
  return RowFunction(
      arity, [value](std::size_t, std::span<const double>) { return value; },
      [](std::size_t, std::span<const double>, std::size_t) { return 0.0; }, "constant", true,
      0.0);
}

RowFunction RowFunction::constant_vector(std::size_t arity, Eigen::VectorXd values) {
  return RowFunction(
      arity,
      [values = std::move(values)](std::size_t i, std::span<const double>) {
        return values(static_cast<Eigen::Index>(i));
      },
      [](std::size_t, std::span<const double>, std::size_t) { return 0.0; }, "constant_vector",
      false, 0.0);
}

RowFunction RowFunction::of_last(std::size_t arity, std::function<double(double)> f,
                                 std::function<double(double)> df, std::string name,
                                 std::optional<double> lipschitz_hint) {
  if (arity == 0) throw ConfigError("of_last requires arity >= 1");
  const std::size_t last = arity - 1;
  return RowFunction(
      arity, [f, last](std::size_t, std::span<const double> h) { return f(h[last]); },
      [df, last](std::size_t, std::span<const double> h, std::size_t w) {
        return w == last ? df(h[last]) : 0.0;
      },
      std::move(name), true, lipschitz_hint);
}

RowFunction RowFunction::identity_last(std::size_t arity) {
  return of_last(
      arity, [](double x) { return x; }, [](double) { return 1.0; }, "identity", 1.0);
}

RowFunction RowFunction::tanh_last(std::size_t arity) {
  return of_last(
      arity, [](double x) { return std::tanh(x); },
      [](double x) {
        const double c = std::cosh(x);
        return 1.0 / (c * c);
      },
      "tanh", 1.0);
}

RowFunction RowFunction::affine(std::vector<double> weights, double offset) {
  const std::size_t arity = weights.size();
  double lip = 0.0;
  for (double w : weights) lip += std::abs(w);
  return RowFunction(
      arity,
      [weights, offset](std::size_t, std::span<const double> h) {
        double acc = offset;
        for (std::size_t w = 0; w < weights.size(); ++w) acc += weights[w] * h[w];
        return acc;
      },
      [weights](std::size_t, std::span<const double>, std::size_t w) { return weights[w]; },
      "affine", true, lip);
}

RowFunction RowFunction::affine_rows(std::vector<Eigen::VectorXd> weights,
                                     Eigen::VectorXd offset) {
  const std::size_t arity = weights.size();
  return RowFunction(
      arity,
      [weights, offset](std::size_t i, std::span<const double> h) {
        const auto r = static_cast<Eigen::Index>(i);
        double acc = offset.size() ? offset(r) : 0.0;
        for (std::size_t w = 0; w < weights.size(); ++w) acc += weights[w](r) * h[w];
        return acc;
      },
      [weights](std::size_t i, std::span<const double>, std::size_t w) {
        return weights[w](static_cast<Eigen::Index>(i));
      },
      "affine_rows", false);
}

RowFunction RowFunction::remapped(std::size_t new_arity, std::vector<std::size_t> index_map,
                                  std::size_t row_offset) const {
  if (index_map.size() != arity_) throw ConfigError("remapped: index map must cover the arity");
  for (std::size_t idx : index_map) {
    if (idx >= new_arity) throw ConfigError("remapped: index outside the new history");
  }
  if (zero_) return zero(new_arity);
  RowFunction self = *this;
  const std::size_t k = arity_;
  RowFunction out(
      new_arity,
      [self, index_map, row_offset, k](std::size_t i, std::span<const double> h) {
        double buf[32];
        std::vector<double> heap;
        double* p = buf;
        if (k > 32) {
          heap.resize(k);
          p = heap.data();
        }
        for (std::size_t q = 0; q < k; ++q) p[q] = h[index_map[q]];
        return self(i - row_offset, std::span<const double>(p, k));
      },
      [self, index_map, row_offset, k](std::size_t i, std::span<const double> h,
                                       std::size_t which) {
        double buf[32];
        std::vector<double> heap;
        double* p = buf;
        if (k > 32) {
          heap.resize(k);
          p = heap.data();
        }
        for (std::size_t q = 0; q < k; ++q) p[q] = h[index_map[q]];
        double acc = 0.0;
        for (std::size_t q = 0; q < k; ++q) {
          if (index_map[q] == which) {
            acc += self.partial(i - row_offset, std::span<const double>(p, k), q);
          }
        }
        return acc;
      },
      name_, coordinate_free_, lipschitz_);
  return out;
}

RowFunction RowFunction::blocks(std::size_t split, RowFunction top, RowFunction bottom) {
  if (top.arity() != bottom.arity()) throw ConfigError("blocks: arity mismatch");
  if (top.is_zero() && bottom.is_zero()) return zero(top.arity());
  const std::size_t arity = top.arity();
  std::string name = top.name() + "|" + bottom.name();
  return RowFunction(
      arity,
      [split, top, bottom](std::size_t i, std::span<const double> h) {
        return i < split ? top(i, h) : bottom(i, h);
      },
      [split, top, bottom](std::size_t i, std::span<const double> h, std::size_t w) {
        return i < split ? top.partial(i, h, w) : bottom.partial(i, h, w);
      },
      std::move(name), false);
}

RowFunction RowFunction::linear_combination(double a, const RowFunction& f, double b,
                                            const RowFunction& g) {
  if (f.arity() != g.arity()) throw ConfigError("linear_combination: arity mismatch");
  std::optional<double> lip;
  if (f.lipschitz_hint() && g.lipschitz_hint()) {
    lip = std::abs(a) * *f.lipschitz_hint() + std::abs(b) * *g.lipschitz_hint();
  }
  return RowFunction(
      f.arity(),
      [a, f, b, g](std::size_t i, std::span<const double> h) { return a * f(i, h) + b * g(i, h); },
      [a, f, b, g](std::size_t i, std::span<const double> h, std::size_t w) {
        return a * f.partial(i, h, w) + b * g.partial(i, h, w);
      },
      f.name() + "+" + g.name(), f.coordinate_free() && g.coordinate_free(), lip);
}

FdReport finite_difference_check(const RowFunction& fn, std::size_t rows, std::uint64_t seed,
                                 std::size_t probes, double tol, double scale) {
  FdReport rep;
  if (fn.arity() == 0 || rows == 0) return rep;
  CounterEngine eng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> h(fn.arity());
  for (std::size_t p = 0; p < probes; ++p) {
    const std::size_t row = static_cast<std::size_t>(eng() % rows);
    for (double& x : h) x = scale * normal(eng);
    for (std::size_t w = 0; w < fn.arity(); ++w) {
      const double x0 = h[w];
      const double step = 1e-5 * std::max(1.0, std::abs(x0));
      h[w] = x0 + step;
      const double up = fn(row, h);
      h[w] = x0 - step;
      const double down = fn(row, h);
      h[w] = x0;
      const double fd = (up - down) / (2.0 * step);
      const double an = fn.partial(row, h, w);
      const double denom = std::max({1.0, std::abs(an), std::abs(fd)});
      const double err = std::abs(an - fd) / denom;
      rep.max_rel_error = std::max(rep.max_rel_error, err);
      if (!(err <= tol)) rep.passed = false;
    }
    ++rep.probes;
  }
  return rep;
}

}  // namespace gfom
