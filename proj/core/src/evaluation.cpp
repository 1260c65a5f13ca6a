#include "amenable/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "amenable/controller.hpp"

namespace amenable {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ArtifactError("cannot write " + path.string());
  return os;
}

// Positions ordered best-first: score descending, then id ascending.
std::vector<std::size_t> rank_order(std::span<const double> scores, std::span<const std::size_t> ids) {
  if (!ids.empty() && ids.size() != scores.size()) throw ShapeError("scores and ids differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  auto id = [&](std::size_t i) { return ids.empty() ? i : ids[i]; };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return id(a) < id(b);
  });
  return order;
}

}  // namespace

std::size_t retained_count(std::size_t h, double k) {
  if (!(k >= 0.0 && k < 1.0)) throw Error("rejection ratio must lie in [0,1)");
  const double exact = (1.0 - k) * static_cast<double>(h);
  return std::min(h, static_cast<std::size_t>(std::ceil(exact - 1e-9)));
}

std::vector<std::size_t> reject_lowest(std::span<const double> scores, std::span<const std::size_t> ids, double k) {
  const std::size_t keep = retained_count(scores.size(), k);
  if (keep == 0) throw Error("rejection removes every sample");
  auto order = rank_order(scores, ids);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<bool> bottom_set(std::span<const double> scores, std::span<const std::size_t> ids, double k) {
  const std::size_t keep = retained_count(scores.size(), k);
  const auto order = rank_order(scores, ids);
  std::vector<bool> low(scores.size(), false);
  for (std::size_t r = keep; r < order.size(); ++r) low[order[r]] = true;
  return low;
}

RejectionCurve rejection_curve(std::span<const ScoredHoldout> runs, std::span<const std::size_t> ids,
                               std::span<const double> ks) {
  if (runs.empty()) throw Error("rejection curve needs at least one run");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!(ks[i] >= 0.0 && ks[i] < 1.0)) throw Error("rejection ratio must lie in [0,1)");
    if (i > 0 && !(ks[i] > ks[i - 1])) throw Error("rejection ratios must be strictly increasing");
  }
  RejectionCurve curve;
  for (double k : ks) {
    CurvePoint pt;
    pt.k = k;
    for (const auto& run : runs) {
      if (run.scores.size() != run.performance.size()) throw ShapeError("scores and performance differ in length");
      const auto kept = reject_lowest(run.scores, ids, k);
      double acc = 0;
      for (std::size_t i : kept) acc += run.performance[i];
      pt.per_run.push_back(acc / static_cast<double>(kept.size()));
      pt.n_retained = kept.size();
    }
    pt.mean = mean(pt.per_run);
    pt.std = stddev(pt.per_run);
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

ScoredHoldout score_holdout(const TaskSpec& task, const TrainedPair& pair, const TaskData& holdout) {
  ScoredHoldout out;
  out.scores = score(*pair.controller, holdout.inputs);
  const auto pred = predict(task, *pair.predictor, holdout);
  out.performance.reserve(pred.metric.size());
  for (double l : pred.metric) out.performance.push_back(performance(task, l));
  return out;
}

RejectionCurve rejection_sweep(const TaskSpec& task, std::span<const TrainedPair> runs, const TaskData& holdout,
                               std::span<const double> ks) {
  std::vector<ScoredHoldout> scored;
  for (const auto& r : runs) scored.push_back(score_holdout(task, r, holdout));
  return rejection_curve(scored, holdout.ids, ks);
}

ContingencyTable contingency(const std::vector<bool>& low_a, const std::vector<bool>& low_b) {
  if (low_a.size() != low_b.size()) throw ShapeError("contingency inputs are not aligned");
  ContingencyTable t;
  for (std::size_t i = 0; i < low_a.size(); ++i) {
    if (low_a[i] && low_b[i]) ++t.tp;
    else if (low_a[i]) ++t.fp;
    else if (low_b[i]) ++t.fn;
    else ++t.tn;
  }
  return t;
}

ContingencyTable contingency(std::span<const double> scores_a, std::span<const double> scores_b,
                             std::span<const std::size_t> ids, double k_a, double k_b) {
  if (scores_a.size() != scores_b.size()) throw ShapeError("contingency inputs are not aligned");
  return contingency(bottom_set(scores_a, ids, k_a), bottom_set(scores_b, ids, k_b));
}

ContingencyTable contingency(std::span<const double> scores_a, std::span<const std::size_t> ids, double k_a,
                             const std::vector<bool>& low_b) {
  return contingency(bottom_set(scores_a, ids, k_a), low_b);
}

double cohens_kappa(const ContingencyTable& t) {
  const double n = static_cast<double>(t.total());
  if (n == 0) throw Error("kappa of an empty table");
  const double po = static_cast<double>(t.tp + t.tn) / n;
  const double a_low = static_cast<double>(t.tp + t.fp) / n, b_low = static_cast<double>(t.tp + t.fn) / n;
  const double pe = a_low * b_low + (1.0 - a_low) * (1.0 - b_low);
  if (pe >= 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

std::string to_string(Quadrant q) {
  switch (q) {
    case Quadrant::kTP: return "TP";
    case Quadrant::kFP: return "FP";
    case Quadrant::kFN: return "FN";
    case Quadrant::kTN: return "TN";
  }
  return "?";
}

QuadrantReport quadrant_report(std::span<const double> ts_scores, std::span<const double> ta_scores,
                               std::span<const double> shaped_scores, std::span<const std::size_t> ids, double k) {
  const std::size_t n = ts_scores.size();
  if (ta_scores.size() != n || (!shaped_scores.empty() && shaped_scores.size() != n))
    throw ShapeError("quadrant inputs are not aligned");
  const auto low_a = bottom_set(ts_scores, ids, k), low_b = bottom_set(ta_scores, ids, k);
  QuadrantReport rep;
  std::array<std::vector<double>, 4> values;
  for (std::size_t i = 0; i < n; ++i) {
    const Quadrant q = low_a[i] ? (low_b[i] ? Quadrant::kTP : Quadrant::kFP)
                                : (low_b[i] ? Quadrant::kFN : Quadrant::kTN);
    rep.assignment.push_back(q);
    rep.ids[static_cast<int>(q)].push_back(ids.empty() ? i : ids[i]);
    if (!shaped_scores.empty()) values[static_cast<int>(q)].push_back(shaped_scores[i]);
  }
  for (int q = 0; q < 4; ++q)
    rep.median_score[q] = values[q].empty() ? std::numeric_limits<double>::quiet_NaN() : median(values[q]);
  return rep;
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw ShapeError("auc inputs are not aligned");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U with average ranks.
  double rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t r = i; r < j; ++r)
      if (positive[order[r]]) {
        rank_sum += avg;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error("auc needs both classes");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    for (std::size_t r = i; r < j; ++r) ranks[order[r]] = 0.5 * static_cast<double>(i + j + 1);
    i = j;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ShapeError("spearman needs two aligned vectors of length >= 2");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double ma = mean(ra), mb = mean(rb);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double median(std::vector<double> v) {
  if (v.empty()) throw Error("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(std::span<const double> v) {
  if (v.empty()) throw Error("mean of an empty set");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

TTestResult paired_t_test_greater(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("paired t-test needs two aligned samples of size >= 2");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] - y[i];
  const double md = mean(d), sd = stddev(d);
  TTestResult r;
  r.df = static_cast<double>(d.size() - 1);
  if (sd == 0.0) {
    r.t = md > 0 ? std::numeric_limits<double>::infinity() : (md < 0 ? -std::numeric_limits<double>::infinity() : 0.0);
    r.p = md > 0 ? 0.0 : (md < 0 ? 1.0 : 0.5);
    return r;
  }
  r.t = md / (sd / std::sqrt(static_cast<double>(d.size())));
  const boost::math::students_t dist(r.df);
  r.p = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

void write_curve_csv(const fs::path& path, const RejectionCurve& curve, const std::string& run_id) {
  auto os = open_out(path);
  os << "run_id,k,mean,std,n_retained\n";
  for (const auto& p : curve.points)
    os << run_id << ',' << fmt(p.k) << ',' << fmt(p.mean) << ',' << fmt(p.std) << ',' << p.n_retained << '\n';
}

void write_table_csv(const fs::path& path, const ContingencyTable& t, const std::string& run_id) {
  auto os = open_out(path);
  os << "# " << kContingencyConvention << '\n';
  os << "run_id,tp,fp,fn,tn,kappa\n";
  os << run_id << ',' << t.tp << ',' << t.fp << ',' << t.fn << ',' << t.tn << ',' << fmt(cohens_kappa(t)) << '\n';
}

void write_quadrants_csv(const fs::path& path, const QuadrantReport& q, std::span<const std::size_t> ids,
                         std::span<const double> ts, std::span<const double> ta, std::span<const double> shaped,
                         const std::vector<bool>& artefact, const std::vector<bool>& hard, const std::string& run_id) {
  auto os = open_out(path);
  os << "run_id,sample_id,quadrant,ts_score,ta_score,shaped_score,artefact_flag,hard_flag\n";
  for (std::size_t i = 0; i < q.assignment.size(); ++i)
    os << run_id << ',' << ids[i] << ',' << to_string(q.assignment[i]) << ',' << fmt(ts[i]) << ',' << fmt(ta[i])
       << ',' << (shaped.empty() ? std::string() : fmt(shaped[i])) << ',' << int(artefact[i]) << ','
       << int(hard[i]) << '\n';
}

void write_curve_svg(const fs::path& path, const RejectionCurve& curve, const std::string& title,
                     const std::string& metric_label) {
  auto os = open_out(path);
  const double W = 480, H = 320, left = 64, right = 16, top = 32, bottom = 48;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, kmax = 0;
  for (const auto& p : curve.points) {
    for (double v : p.per_run) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    kmax = std::max(kmax, p.k);
  }
  if (curve.points.empty()) lo = 0, hi = 1;
  if (hi - lo < 1e-9) lo -= 0.01, hi += 0.01;
  if (kmax <= 0) kmax = 1;
  auto px = [&](double k) { return left + (W - left - right) * k / kmax; };
  auto py = [&](double v) { return H - bottom - (H - top - bottom) * (v - lo) / (hi - lo); };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 10
     << "\" text-anchor=\"middle\" font-size=\"12\">holdout rejection ratio k</text>\n";
  os << "<text x=\"16\" y=\"" << (top + H - bottom) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
     << "transform=\"rotate(-90 16 " << (top + H - bottom) / 2 << ")\">" << metric_label << "</text>\n";
  for (const auto& p : curve.points)
    os << "<text x=\"" << px(p.k) << "\" y=\"" << H - bottom + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
       << fmt(p.k) << "</text>\n";
  for (double v : {lo, hi})
    os << "<text x=\"" << left - 4 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(v)
       << "</text>\n";
  const std::size_t runs = curve.points.empty() ? 0 : curve.points.front().per_run.size();
  for (std::size_t r = 0; r < runs; ++r) {
    os << "<polyline fill=\"none\" stroke=\"#8aa\" stroke-width=\"1\" points=\"";
    for (const auto& p : curve.points) os << px(p.k) << ',' << py(p.per_run[r]) << ' ';
    os << "\"/>\n";
  }
  os << "<polyline fill=\"none\" stroke=\"#c33\" stroke-width=\"2\" points=\"";
  for (const auto& p : curve.points) os << px(p.k) << ',' << py(p.mean) << ' ';
  os << "\"/>\n</svg>\n";
}

}  // namespace amenable
