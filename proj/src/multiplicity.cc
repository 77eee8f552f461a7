/*
 * Copyright 2026 The Fedrash Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fedrash/multiplicity.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "fedrash/status_macros.h"

namespace fedrash {
namespace {

absl::StatusOr<size_t> RequireMembers(const RashomonSelection& selection,
                                      const PredictionTensor& tensor) {
  if (selection.members.size() != tensor.num_candidates()) {
    return absl::InvalidArgumentError("selection does not match the tensor's pool");
  }
  if (selection.empty()) {
    return absl::FailedPreconditionError("metric undefined on an empty Rashomon set");
  }
  return selection.size();
}

// Number of samples of one client where some member disagrees with the
// baseline, and the per-member flip counts.
struct FlipCounts {
  size_t ambiguous = 0;
  std::vector<size_t> flips;  // Parallel to the member list.
};

FlipCounts CountFlips(const PredictionTensor& tensor, size_t client_idx,
                      const RashomonSelection& selection,
                      std::span<const size_t> members) {
  FlipCounts out;
  out.flips.assign(members.size(), 0);
  std::span<const int> base = tensor.Decisions(client_idx, selection.baseline_index);
  std::vector<bool> ambiguous(base.size(), false);
  for (size_t m = 0; m < members.size(); ++m) {
    std::span<const int> dec = tensor.Decisions(client_idx, members[m]);
    for (size_t i = 0; i < base.size(); ++i) {
      if (dec[i] != base[i]) {
        ++out.flips[m];
        ambiguous[i] = true;
      }
    }
  }
  out.ambiguous = static_cast<size_t>(std::count(ambiguous.begin(), ambiguous.end(), true));
  return out;
}

struct ChannelState {
  std::vector<double> divergence;  // D(W_x || q), nats.
  double mutual_information = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<double> q;  // Output distribution.
};

// Rows are stored as offsets from row 0 so that q - W_x is formed from small
// differences; nearly identical rows would otherwise lose every significant
// digit of their divergence.
struct Channel {
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<double>> offsets;  // rows[x] - rows[0].
};

ChannelState Evaluate(const Channel& channel, const std::vector<double>& p) {
  const size_t m = channel.rows.size();
  const size_t d = channel.rows[0].size();
  std::vector<double> mean_offset(d, 0.0);
  for (size_t x = 0; x < m; ++x) {
    if (p[x] == 0.0) continue;
    for (size_t y = 0; y < d; ++y) mean_offset[y] += p[x] * channel.offsets[x][y];
  }
  ChannelState s;
  s.q.resize(d);
  for (size_t y = 0; y < d; ++y) s.q[y] = channel.rows[0][y] + mean_offset[y];
  s.divergence.assign(m, 0.0);
  for (size_t x = 0; x < m; ++x) {
    double dx = 0.0;
    for (size_t y = 0; y < d; ++y) {
      const double w = channel.rows[x][y];
      // log(w / q) = -log1p((q - w) / w).
      dx -= w * std::log1p((mean_offset[y] - channel.offsets[x][y]) / w);
    }
    s.divergence[x] = dx;
  }
  const double max_d = *std::max_element(s.divergence.begin(), s.divergence.end());
  double sum = 0.0;
  for (size_t x = 0; x < m; ++x) {
    // 0 * log 0 = 0 on the input side.
    if (p[x] == 0.0) continue;
    sum += p[x] * std::exp(s.divergence[x] - max_d);
    s.mutual_information += p[x] * s.divergence[x];
  }
  s.lower = max_d + std::log(sum);
  s.upper = max_d;
  return s;
}

// Solves A z = b in place by Gaussian elimination with partial pivoting.
bool SolveDense(std::vector<std::vector<double>>& a, std::vector<double>& b) {
  const size_t n = b.size();
  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    for (size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) < 1e-13) return false;
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (size_t col = n; col-- > 0;) {
    double v = b[col];
    for (size_t c = col + 1; c < n; ++c) v -= a[col][c] * b[c];
    b[col] = v / a[col][col];
  }
  return true;
}

// Newton's method on the optimality conditions restricted to `support`:
// D(W_x || q) equal for every supported x and p summing to one. Rows whose
// weight reaches zero, or that make the system singular, leave the support.
// Returns false when fewer than two inputs remain.
bool SolveOnSupport(const Channel& channel, std::vector<size_t>& support,
                    std::vector<double>& p) {
  const size_t m = p.size();
  const size_t d = channel.rows[0].size();
  auto restrict_to = [&](const std::vector<double>& from) {
    std::vector<double> out(m, 0.0);
    double total = 0.0;
    for (size_t x : support) total += from[x];
    for (size_t x : support) {
      out[x] = total > 0.0 ? from[x] / total : 1.0 / static_cast<double>(support.size());
    }
    return out;
  };
  std::vector<double> cur = restrict_to(p);
  for (int iter = 0; iter < 100 && support.size() >= 2; ++iter) {
    const ChannelState st = Evaluate(channel, cur);
    const size_t k = support.size();
    double residual = 0.0;
    for (size_t i = 0; i < k; ++i) {
      residual = std::max(residual, std::abs(st.divergence[support[i]] - st.mutual_information));
    }
    if (residual < 1e-15) break;
    // Unknowns: weights on the support, then the common divergence.
    std::vector<std::vector<double>> jac(k + 1, std::vector<double>(k + 1, 0.0));
    std::vector<double> rhs(k + 1, 0.0);
    double max_diag = 0.0;
    for (size_t i = 0; i < k; ++i) {
      const auto& wi = channel.rows[support[i]];
      for (size_t j = 0; j < k; ++j) {
        const auto& wj = channel.rows[support[j]];
        double v = 0.0;
        for (size_t y = 0; y < d; ++y) v -= wi[y] * wj[y] / st.q[y];
        jac[i][j] = v;
      }
      jac[i][k] = -1.0;
      jac[k][i] = 1.0;
      max_diag = std::max(max_diag, -jac[i][i]);
      rhs[i] = -(st.divergence[support[i]] - st.mutual_information);
    }
    // The curvature is singular once the support exceeds the output size; a
    // small ridge keeps the step defined and lets blocked rows drop out.
    for (size_t i = 0; i < k; ++i) jac[i][i] -= 1e-10 * max_diag;
    if (!SolveDense(jac, rhs)) {
      const auto smallest = std::min_element(
          support.begin(), support.end(), [&](size_t a, size_t b) { return cur[a] < cur[b]; });
      support.erase(smallest);
      cur = restrict_to(cur);
      continue;
    }
    // Largest step in (0, 1] keeping every weight nonnegative.
    double t = 1.0;
    size_t blocking = k;
    for (size_t i = 0; i < k; ++i) {
      if (rhs[i] < 0.0 && cur[support[i]] + t * rhs[i] <= 0.0) {
        t = cur[support[i]] / -rhs[i];
        blocking = i;
      }
    }
    // I is concave, so the Newton direction ascends; backtrack if rounding
    // or a poor start says otherwise.
    std::vector<double> next;
    bool improved = false;
    for (int halvings = 0; halvings < 30; ++halvings) {
      next = cur;
      for (size_t i = 0; i < k; ++i) next[support[i]] = std::max(0.0, cur[support[i]] + t * rhs[i]);
      if (blocking < k) next[support[blocking]] = 0.0;
      double total = 0.0;
      for (size_t x : support) total += next[x];
      for (size_t x : support) next[x] /= total;
      if (Evaluate(channel, next).mutual_information >= st.mutual_information - 1e-16) {
        improved = true;
        break;
      }
      t *= 0.5;
      blocking = k;
    }
    if (!improved) break;
    cur = std::move(next);
    if (blocking < k) support.erase(support.begin() + static_cast<ptrdiff_t>(blocking));
  }
  if (support.size() < 2) return false;
  p = std::move(cur);
  return true;
}

// Active-set refinement: solve on the heaviest inputs, then admit the input
// with the largest divergence while it exceeds the current capacity estimate.
bool PolishOnSupport(const Channel& channel, std::vector<double>& p, double tol_nats) {
  const size_t m = p.size();
  const size_t d = channel.rows[0].size();
  const double top = *std::max_element(p.begin(), p.end());
  std::vector<size_t> support;
  for (size_t x = 0; x < m; ++x) {
    if (p[x] > 1e-9 * top) support.push_back(x);
  }
  std::sort(support.begin(), support.end(), [&](size_t a, size_t b) { return p[a] > p[b]; });
  // At most d inputs carry weight at a capacity-achieving distribution.
  if (support.size() > d) support.resize(d);
  std::vector<double> cur = p;
  bool solved = false;
  for (size_t round = 0; round < m; ++round) {
    if (!SolveOnSupport(channel, support, cur)) break;
    solved = true;
    const ChannelState st = Evaluate(channel, cur);
    size_t worst = 0;
    for (size_t x = 1; x < m; ++x) {
      if (st.divergence[x] > st.divergence[worst]) worst = x;
    }
    if (st.divergence[worst] - st.mutual_information < tol_nats ||
        std::find(support.begin(), support.end(), worst) != support.end()) {
      break;
    }
    support.push_back(worst);
    cur[worst] = 1e-3;
  }
  if (!solved) return false;
  p = std::move(cur);
  return true;
}

std::vector<double> MultiplicativeStep(const std::vector<double>& p,
                                       const std::vector<double>& divergence,
                                       double step) {
  const size_t m = p.size();
  std::vector<double> logw(m, -std::numeric_limits<double>::infinity());
  double max_log = -std::numeric_limits<double>::infinity();
  for (size_t x = 0; x < m; ++x) {
    if (p[x] == 0.0) continue;
    logw[x] = std::log(p[x]) + step * divergence[x];
    max_log = std::max(max_log, logw[x]);
  }
  std::vector<double> out(m, 0.0);
  double total = 0.0;
  for (size_t x = 0; x < m; ++x) {
    out[x] = std::exp(logw[x] - max_log);
    total += out[x];
  }
  for (double& v : out) v /= total;
  return out;
}

// Two-input channel. With p the weight on row a, q = p*a + (1-p)*b and
// dI/dp = D(a||q) - D(b||q), which decreases in p; the capacity is the common
// divergence at its root. Differences a - q = (1-p)(a-b) and b - q = -p(a-b)
// are formed directly so that nearly identical rows keep full precision.
struct TwoRowResult {
  double lower = 0.0;  // I(p) at the final p, nats.
  double upper = 0.0;  // max(D(a||q), D(b||q)), nats.
  int iterations = 0;
};

TwoRowResult TwoRowCapacity(const std::vector<double>& a, const std::vector<double>& b) {
  auto divergences = [&](double p, double& da, double& db) {
    da = 0.0;
    db = 0.0;
    for (size_t y = 0; y < a.size(); ++y) {
      const double diff = a[y] - b[y];
      // log(a/q) = -log1p((q - a)/a), q - a = -(1-p)*diff.
      da -= a[y] * std::log1p(-(1.0 - p) * diff / a[y]);
      db -= b[y] * std::log1p(p * diff / b[y]);
    }
  };
  double lo = 0.0;
  double hi = 1.0;
  TwoRowResult r;
  double da = 0.0;
  double db = 0.0;
  for (; r.iterations < 200 && hi - lo > 1e-17; ++r.iterations) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    divergences(mid, da, db);
    if (da > db) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double p = 0.5 * (lo + hi);
  divergences(p, da, db);
  r.lower = std::max(0.0, p * da + (1.0 - p) * db);
  r.upper = std::max({da, db, r.lower});
  return r;
}

}  // namespace

absl::StatusOr<double> AmbiguityLocal(const PredictionTensor& tensor, int client_id,
                                      const RashomonSelection& selection) {
  FEDRASH_RETURN_IF_ERROR(RequireMembers(selection, tensor).status());
  FEDRASH_ASSIGN_OR_RETURN(size_t idx, tensor.IndexOf(client_id));
  const std::vector<size_t> members = selection.MemberIndices();
  const FlipCounts fc = CountFlips(tensor, idx, selection, members);
  return static_cast<double>(fc.ambiguous) / static_cast<double>(tensor.n_test(idx));
}

double AmbiguityGlobal(std::span<const LocalValue> locals) {
  double total = 0.0;
  for (const LocalValue& l : locals) total += static_cast<double>(l.n);
  if (total == 0.0) return 0.0;
  double out = 0.0;
  for (const LocalValue& l : locals) out += static_cast<double>(l.n) / total * l.value;
  return out;
}

absl::StatusOr<double> DiscrepancyLocal(const PredictionTensor& tensor, int client_id,
                                        const RashomonSelection& selection) {
  FEDRASH_RETURN_IF_ERROR(RequireMembers(selection, tensor).status());
  FEDRASH_ASSIGN_OR_RETURN(size_t idx, tensor.IndexOf(client_id));
  const std::vector<size_t> members = selection.MemberIndices();
  const FlipCounts fc = CountFlips(tensor, idx, selection, members);
  const size_t most = *std::max_element(fc.flips.begin(), fc.flips.end());
  return static_cast<double>(most) / static_cast<double>(tensor.n_test(idx));
}

double DiscrepancyFederated(std::span<const LocalValue> locals) {
  double total = 0.0;
  for (const LocalValue& l : locals) total += static_cast<double>(l.n);
  if (total == 0.0) return 0.0;
  double out = 0.0;
  for (const LocalValue& l : locals) {
    out = std::max(out, static_cast<double>(l.n) / total * l.value);
  }
  return out;
}

absl::StatusOr<double> PooledAmbiguity(const PredictionTensor& tensor,
                                       std::span<const int> clients,
                                       const RashomonSelection& selection) {
  FEDRASH_RETURN_IF_ERROR(RequireMembers(selection, tensor).status());
  const std::vector<size_t> members = selection.MemberIndices();
  size_t ambiguous = 0;
  size_t total = 0;
  for (int id : clients) {
    FEDRASH_ASSIGN_OR_RETURN(size_t idx, tensor.IndexOf(id));
    ambiguous += CountFlips(tensor, idx, selection, members).ambiguous;
    total += tensor.n_test(idx);
  }
  if (total == 0) return absl::InvalidArgumentError("no samples");
  return static_cast<double>(ambiguous) / static_cast<double>(total);
}

absl::StatusOr<double> PooledDiscrepancy(const PredictionTensor& tensor,
                                         std::span<const int> clients,
                                         const RashomonSelection& selection) {
  FEDRASH_RETURN_IF_ERROR(RequireMembers(selection, tensor).status());
  const std::vector<size_t> members = selection.MemberIndices();
  std::vector<size_t> flips(members.size(), 0);
  size_t total = 0;
  for (int id : clients) {
    FEDRASH_ASSIGN_OR_RETURN(size_t idx, tensor.IndexOf(id));
    const FlipCounts fc = CountFlips(tensor, idx, selection, members);
    for (size_t m = 0; m < members.size(); ++m) flips[m] += fc.flips[m];
    total += tensor.n_test(idx);
  }
  if (total == 0) return absl::InvalidArgumentError("no samples");
  return static_cast<double>(*std::max_element(flips.begin(), flips.end())) /
         static_cast<double>(total);
}

double DisagreementFromCounts(size_t k, size_t m) {
  if (m == 0) return 0.0;
  const double kd = static_cast<double>(k);
  const double md = static_cast<double>(m);
  return 4.0 * kd * (md - kd) / (md * md);
}

absl::StatusOr<double> Disagreement(const PredictionTensor& tensor, int client_id,
                                    size_t sample, const RashomonSelection& selection,
                                    double tau) {
  if (!tensor.is_binary()) {
    return absl::UnimplementedError("disagreement is only defined for binary tasks");
  }
  FEDRASH_ASSIGN_OR_RETURN(size_t m, RequireMembers(selection, tensor));
  FEDRASH_ASSIGN_OR_RETURN(size_t idx, tensor.IndexOf(client_id));
  if (sample >= tensor.n_test(idx)) {
    return absl::OutOfRangeError(absl::StrFormat("sample %d out of range", sample));
  }
  size_t k = 0;
  for (size_t j : selection.MemberIndices()) {
    if (tensor.ScoreRow(idx, j, sample)[1] > tau) ++k;
  }
  return DisagreementFromCounts(k, m);
}

absl::StatusOr<CapacityResult> RashomonCapacity(const Matrix& rows,
                                                const CapacityOptions& options) {
  if (rows.rows() == 0 || rows.cols() == 0) {
    return absl::InvalidArgumentError("capacity needs at least one row and one class");
  }
  if (!(options.tolerance > 0.0) || options.max_iters < 1) {
    return absl::InvalidArgumentError("tolerance must be > 0 and max_iters >= 1");
  }
  const size_t d = rows.cols();
  std::vector<std::vector<double>> channel;
  for (size_t r = 0; r < rows.rows(); ++r) {
    double sum = 0.0;
    for (double v : rows.Row(r)) {
      if (!(v >= 0.0 && v <= 1.0)) {
        return absl::InvalidArgumentError(
            absl::StrFormat("row %d has entry %g outside [0, 1]", r, v));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      return absl::InvalidArgumentError(
          absl::StrFormat("row %d sums to %.12g, not 1", r, sum));
    }
    std::vector<double> row(rows.Row(r).begin(), rows.Row(r).end());
    double clipped = 0.0;
    for (double& v : row) {
      v = std::max(v, 1e-12);
      clipped += v;
    }
    for (double& v : row) v /= clipped;
    channel.push_back(std::move(row));
  }
  // Drop rows that are mixtures of others.
  std::sort(channel.begin(), channel.end());
  channel.erase(std::unique(channel.begin(), channel.end()), channel.end());
  if (d == 2 && channel.size() > 2) {
    auto [lo, hi] = std::minmax_element(
        channel.begin(), channel.end(),
        [](const auto& a, const auto& b) { return a[1] < b[1]; });
    channel = {*lo, *hi};
  }
  CapacityResult result;
  if (channel.size() == 1) return result;
  const double tol_nats = options.tolerance * std::numbers::ln2;
  if (channel.size() == 2) {
    const TwoRowResult two = TwoRowCapacity(channel[0], channel[1]);
    result.iterations = two.iterations;
    result.lower_bits = two.lower / std::numbers::ln2;
    result.upper_bits = two.upper / std::numbers::ln2;
    result.bits = result.lower_bits;
    if (two.upper - two.lower >= tol_nats) {
      return absl::ResourceExhaustedError(absl::StrFormat(
          "two-input capacity bracket [%.12g, %.12g] bits wider than tolerance",
          result.lower_bits, result.upper_bits));
    }
    return result;
  }

    Channel ch;
  for (const auto& row : channel) {
    std::vector<double> offset(d);
    for (size_t y = 0; y < d; ++y) offset[y] = row[y] - channel[0][y];
    ch.offsets.push_back(std::move(offset));
  }
  ch.rows = std::move(channel);
  std::vector<double> p(ch.rows.size(), 1.0 / static_cast<double>(ch.rows.size()));
  ChannelState state = Evaluate(ch, p);
  double best_lower = std::max(state.lower, state.mutual_information);
  double best_upper = state.upper;
  double step = 1.0;
  int iter = 0;
  while (best_upper - best_lower >= tol_nats && iter < options.max_iters) {
    ++iter;
    if (iter % 25 == 0) {
      std::vector<double> polished = p;
      if (PolishOnSupport(ch, polished, tol_nats)) {
        const ChannelState ps = Evaluate(ch, polished);
        best_lower = std::max(best_lower, ps.mutual_information);
        best_upper = std::min(best_upper, ps.upper);
        if (best_upper - best_lower < tol_nats) break;
        // Resume from the polished point, keeping every input reachable.
        const double floor = 1e-6 / static_cast<double>(polished.size());
        for (double& v : polished) v = (1.0 - 1e-6) * v + floor;
        p = std::move(polished);
        state = Evaluate(ch, p);
        step = 1.0;
      }
    }
    std::vector<double> next = MultiplicativeStep(p, state.divergence, step);
    ChannelState next_state = Evaluate(ch, next);
    if (step > 1.0 && next_state.mutual_information < state.mutual_information) {
      step = std::max(1.0, step / 4.0);
    } else {
      p = std::move(next);
      state = std::move(next_state);
      step = std::min(step * 2.0, 1e12);
    }
    best_lower = std::max({best_lower, state.lower, state.mutual_information});
    best_upper = std::min(best_upper, state.upper);
  }
  result.iterations = iter;
  result.lower_bits = std::max(0.0, best_lower / std::numbers::ln2);
  result.upper_bits = best_upper / std::numbers::ln2;
  result.bits = result.lower_bits;
  if (best_upper - best_lower >= tol_nats) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "Blahut-Arimoto did not converge in %d iterations; capacity in "
        "[%.12g, %.12g] bits",
        iter, result.lower_bits, result.upper_bits));
  }
  return result;
}

double Vpr(std::span<const double> scores) {
  if (scores.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  return *hi - *lo;
}

double ScoreStd(std::span<const double> scores) {
  // Welford's update.
  double mean = 0.0;
  double m2 = 0.0;
  size_t n = 0;
  for (double v : scores) {
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }
  if (n == 0) return 0.0;
  return std::sqrt(std::max(0.0, m2 / static_cast<double>(n)));
}

namespace {

template <typename F>
double ColumnwiseMax(const Matrix& member_scores, F metric) {
  std::vector<double> column(member_scores.rows());
  auto fill = [&](size_t k) {
    for (size_t r = 0; r < member_scores.rows(); ++r) column[r] = member_scores(r, k);
  };
  if (member_scores.cols() == 2) {
    fill(1);
    return metric(column);
  }
  double best = 0.0;
  for (size_t k = 0; k < member_scores.cols(); ++k) {
    fill(k);
    best = std::max(best, metric(column));
  }
  return best;
}

}  // namespace

double VprOfRows(const Matrix& member_scores) {
  return ColumnwiseMax(member_scores, [](std::span<const double> c) { return Vpr(c); });
}

double ScoreStdOfRows(const Matrix& member_scores) {
  return ColumnwiseMax(member_scores,
                       [](std::span<const double> c) { return ScoreStd(c); });
}

Matrix MemberScores(const PredictionTensor& tensor, size_t client_idx, size_t sample,
                    std::span<const size_t> members) {
  Matrix out(members.size(), static_cast<size_t>(tensor.d_out()));
  for (size_t m = 0; m < members.size(); ++m) {
    std::span<const double> row = tensor.ScoreRow(client_idx, members[m], sample);
    std::copy(row.begin(), row.end(), out.Row(m).begin());
  }
  return out;
}

std::string SampleMetricName(SampleMetric metric) {
  switch (metric) {
    case SampleMetric::kRc:
      return "rashomon_capacity";
    case SampleMetric::kVpr:
      return "vpr";
    case SampleMetric::kStd:
      return "std";
    case SampleMetric::kDisagreement:
      return "disagreement";
  }
  return "unknown";
}

absl::StatusOr<std::vector<double>> PerSampleMetric(
    const PredictionTensor& tensor, int client_id, const RashomonSelection& selection,
    SampleMetric metric, const SampleMetricOptions& options) {
  FEDRASH_ASSIGN_OR_RETURN(size_t m, RequireMembers(selection, tensor));
  FEDRASH_ASSIGN_OR_RETURN(size_t idx, tensor.IndexOf(client_id));
  if (metric == SampleMetric::kDisagreement && !tensor.is_binary()) {
    return absl::UnimplementedError("disagreement is only defined for binary tasks");
  }
  const std::vector<size_t> members = selection.MemberIndices();
  const size_t n = tensor.n_test(idx);
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    switch (metric) {
      case SampleMetric::kDisagreement: {
        size_t k = 0;
        for (size_t j : members) {
          if (tensor.ScoreRow(idx, j, i)[1] > options.tau) ++k;
        }
        out[i] = DisagreementFromCounts(k, m);
        break;
      }
      case SampleMetric::kRc: {
        FEDRASH_ASSIGN_OR_RETURN(
            CapacityResult rc,
            RashomonCapacity(MemberScores(tensor, idx, i, members), options.capacity));
        out[i] = rc.bits;
        break;
      }
      case SampleMetric::kVpr:
        out[i] = VprOfRows(MemberScores(tensor, idx, i, members));
        break;
      case SampleMetric::kStd:
        out[i] = ScoreStdOfRows(MemberScores(tensor, idx, i, members));
        break;
    }
  }
  return out;
}

std::vector<double> PerSampleScores::Pooled() const {
  std::vector<double> out;
  for (const auto& [id, values] : per_client) out.insert(out.end(), values.begin(), values.end());
  return out;
}

absl::StatusOr<std::vector<PercentileRow>> PercentileSummary(
    std::span<const double> values, std::span<const double> percentiles) {
  if (values.empty()) return absl::InvalidArgumentError("no values to summarise");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  std::vector<PercentileRow> out;
  for (double p : percentiles) {
    if (!(p >= 0.0 && p <= 100.0)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("percentile %g outside [0, 100]", p));
    }
    // Slack absorbs p/100 * n landing a hair above an integer.
    size_t rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(n) - 1e-9));
    rank = std::clamp(rank, size_t{1}, n);
    out.push_back({p, sorted[rank - 1]});
  }
  return out;
}

}  // namespace fedrash
