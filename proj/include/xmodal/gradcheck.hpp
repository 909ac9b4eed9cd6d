#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "xmodal/grid.hpp"

namespace xmodal {

struct GradCheckReport {
  double max_rel_error = 0.0;
  int worst_row = -1;
  int worst_col = -1;
  std::string worst_input;
  long num_checked = 0;
  long num_skipped_kinks = 0;
};

// Central finite differences of a scalar function of one grid, entry by
// entry, step h. Entries where the function throws on a perturbed input are
// marked unavailable (NaN).
inline Grid<double> finite_diff(const std::function<double(const Grid<double>&)>& f,
                                const Grid<double>& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff: step must be positive");
  Grid<double> g(x.rows(), x.cols(), 0.0);
  Grid<double> probe = x;
  for (size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    try {
      probe[i] = orig + h;
      const double fp = f(probe);
      probe[i] = orig - h;
      const double fm = f(probe);
      g[i] = (fp - fm) / (2.0 * h);
    } catch (const std::exception&) {
      g[i] = std::numeric_limits<double>::quiet_NaN();
    }
    probe[i] = orig;
  }
  return g;
}

// Relative error |a - n| / max(abs_floor, |a|, |n|), reported with the worst
// location. NaN entries on either side are skipped as kinks.
inline GradCheckReport compare(const Grid<double>& analytic, const Grid<double>& numeric,
                               double /*rel_tol*/, double abs_floor,
                               const std::string& input_name = "input") {
  if (!analytic.same_shape(numeric)) throw std::invalid_argument("compare: shape mismatch");
  GradCheckReport rep;
  rep.worst_input = input_name;
  for (int r = 0; r < analytic.rows(); ++r)
    for (int c = 0; c < analytic.cols(); ++c) {
      const double a = analytic(r, c);
      const double n = numeric(r, c);
      if (!std::isfinite(a) || !std::isfinite(n)) {
        ++rep.num_skipped_kinks;
        continue;
      }
      const double denom = std::max({abs_floor, std::abs(a), std::abs(n)});
      const double rel = std::abs(a - n) / denom;
      ++rep.num_checked;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_row = r;
        rep.worst_col = c;
      }
    }
  return rep;
}

// A differentiable-loss probe: one evaluation returns the loss value and a
// fingerprint of its discrete structure (kept sets, signs, validity).
struct LossProbe {
  std::string input_name;
  std::function<std::pair<double, std::uint64_t>(const Grid<double>&)> eval;
  // Residual magnitude per entry at the base point; entries with residual
  // below 10h sit too close to an absolute-value kink and are skipped.
  Grid<double> kink_residual;
  bool has_kink_residual = false;
};

// Checks an analytic gradient against central differences with per-entry
// step h_i = base_step * max(1, |x_i|). Entries are skipped and counted as
// kinks when (a) the base-point residual magnitude is below 10 h_i, or
// (b) the discrete structure differs between the two probe points, which
// makes the central difference cross a non-smooth boundary.
inline GradCheckReport check_gradient(const LossProbe& probe, const Grid<double>& x,
                                      const Grid<double>& analytic, double base_step = 1e-5,
                                      double abs_floor = 1e-8) {
  GradCheckReport rep;
  rep.worst_input = probe.input_name;
  Grid<double> work = x;
  for (int r = 0; r < x.rows(); ++r)
    for (int c = 0; c < x.cols(); ++c) {
      const double orig = work(r, c);
      const double h = base_step * std::max(1.0, std::abs(orig));
      if (probe.has_kink_residual && probe.kink_residual(r, c) >= 0.0 &&
          probe.kink_residual(r, c) < 10.0 * h) {
        ++rep.num_skipped_kinks;
        continue;
      }
      std::pair<double, std::uint64_t> plus, minus;
      bool failed = false;
      try {
        work(r, c) = orig + h;
        plus = probe.eval(work);
        work(r, c) = orig - h;
        minus = probe.eval(work);
      } catch (const std::exception&) {
        failed = true;
      }
      work(r, c) = orig;
      if (failed || plus.second != minus.second) {
        ++rep.num_skipped_kinks;
        continue;
      }
      const double numeric = (plus.first - minus.first) / (2.0 * h);
      const double a = analytic(r, c);
      const double denom = std::max({abs_floor, std::abs(a), std::abs(numeric)});
      const double rel = std::abs(a - numeric) / denom;
      ++rep.num_checked;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_row = r;
        rep.worst_col = c;
      }
    }
  return rep;
}

}  // namespace xmodal
