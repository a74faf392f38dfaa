// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cmgan/rng.hpp"

namespace cmgan {
namespace {

std::vector<size_t> pick_indices(size_t n, size_t max_elements, Rng& rng) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  if (max_elements == 0 || max_elements >= n) return idx;
  rng.shuffle(idx.begin(), idx.end());
  return idx;
}

// Walks `order`, checking up to `budget` elements that do not straddle a kink.
template <typename Eval, typename Set>
void check_tensor(const std::string& name, std::span<const double> analytic, std::span<double> values,
                  const std::vector<size_t>& order, size_t budget, Eval eval, Set set_value,
                  double f0, const GradcheckOptions& opt, GradcheckReport& report) {
  size_t checked = 0;
  for (size_t idx : order) {
    if (budget && checked >= budget) break;
    const double orig = values[idx];
    auto central = [&](double h) {
      set_value(idx, orig + h);
      const double p = eval();
      set_value(idx, orig - h);
      const double m = eval();
      return std::pair{p, m};
    };
    double numeric = 0;
    bool smooth = false;
    double h = opt.eps;
    for (int attempt = 0; attempt <= (opt.skip_kinks ? opt.kink_retries : 0); ++attempt, h /= 10) {
      const auto [fp, fm] = central(h);
      numeric = (fp - fm) / (2 * h);
      if (!opt.skip_kinks) {
        smooth = true;
        break;
      }
      const auto [fph, fmh] = central(h / 2);
      const auto [fpq, fmq] = central(h / 4);
      // Second differences at h, h/2 and h/4. A kink at distance d from the
      // point hides from one ratio when d = h/3 but not from the other. Over
      // all d the larger discrepancy is at least a third of the error the
      // kink adds to the central difference, hence the factor 3.
      const double sd = fp - 2 * f0 + fm;
      const double sd_half = fph - 2 * f0 + fmh;
      const double sd_quarter = fpq - 2 * f0 + fmq;
      const double limit = opt.tol * std::max(std::abs(numeric), opt.floor) / 3;
      // The central difference error scales as h^2, so 4/3 of the change
      // from h to h/2 estimates it.
      const double truncation = std::abs(numeric - (fph - fmh) / h) * 4 / 3;
      if (std::abs(sd - 4 * sd_half) / (2 * h) <= limit && std::abs(sd_half - 4 * sd_quarter) / h <= limit &&
          truncation <= limit) {
        smooth = true;
        break;
      }
    }
    if (!smooth) {
      set_value(idx, orig);
      ++report.kinks_skipped;
      continue;
    }
    const double denom = std::max({std::abs(analytic[idx]), std::abs(numeric), opt.floor});
    set_value(idx, orig);
    GradcheckEntry e;
    e.tensor = name;
    e.index = idx;
    e.analytic = analytic[idx];
    e.numeric = numeric;
    e.rel_error = std::abs(e.analytic - e.numeric) / denom;
    e.passed = e.rel_error <= opt.tol;
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    report.passed = report.passed && e.passed;
    report.entries.push_back(e);
    ++checked;
  }
  if (checked == 0 && !order.empty()) report.unchecked.push_back(name);
}

}  // namespace

std::string GradcheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " checked=" << entries.size()
     << " max_rel_error=" << max_rel_error << " kinks_skipped=" << kinks_skipped;
  if (!unchecked.empty()) os << " unchecked_tensors=" << unchecked.size();
  return os.str();
}

GradcheckReport gradcheck(const GradFn& f, const Tensor<double>& point, const GradcheckOptions& opt) {
  GradcheckReport report;
  Tensor<double> analytic;
  double f0;
  {
    Graph<double> g;
    Var<double> x = g.leaf(point, true);
    Var<double> y = f(g, x);
    f0 = y.value().item();
    auto grads = g.backward(y);
    analytic = grads.at(x.id());
  }
  Tensor<double> work = point;
  auto eval = [&] {
    Graph<double> g;
    return f(g, g.constant(work)).value().item();
  };
  auto set = [&](size_t i, double v) { work[i] = v; };
  Rng rng(opt.seed);
  auto order = pick_indices(work.size(), opt.max_elements, rng);
  check_tensor("input", analytic.data(), work.data(), order, opt.max_elements, eval, set, f0, opt,
               report);
  if (report.entries.empty()) report.passed = false;
  return report;
}

GradcheckReport gradcheck_params(const ParamLossFn& loss, const std::vector<Parameter<double>*>& params,
                                 const GradcheckOptions& opt) {
  GradcheckReport report;
  for (Parameter<double>* p : params) p->zero_grad();
  double f0;
  {
    Graph<double> g;
    Var<double> y = loss(g);
    f0 = y.value().item();
    g.backward(y);
  }
  auto eval = [&] {
    Graph<double> g;
    return loss(g).value().item();
  };
  Rng rng(opt.seed);
  for (Parameter<double>* p : params) {
    Tensor<double> analytic = p->grad;
    auto set = [p](size_t i, double v) { p->value[i] = v; };
    auto order = pick_indices(p->value.size(), opt.max_elements, rng);
    check_tensor(p->name, analytic.data(), p->value.data(), order, opt.max_elements, eval, set, f0,
                 opt, report);
  }
  if (report.entries.empty()) report.passed = false;
  return report;
}

}  // namespace cmgan
