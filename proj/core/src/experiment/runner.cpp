#include "amenable/experiment/runner.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "amenable/nn/checkpoint.hpp"

namespace amenable::experiment {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ArtifactError("cannot write " + path.string());
  return os;
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const fs::path& file) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ArtifactError("malformed number '" + s + "' in " + file.string());
  return v;
}

// Rows of a CSV with a header, skipping '#' lines.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ArtifactError("missing " + path.string());
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line.front() == '#') continue;
    auto cells = split_csv_line(line);
    if (header.empty()) {
      header = std::move(cells);
      continue;
    }
    if (cells.size() != header.size()) throw ArtifactError("ragged row in " + path.string());
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string config_value(const RunManifest& m, const std::string& key) {
  for (const auto& [k, v] : m.config)
    if (k == key) return v;
  throw ArtifactError("manifest of run " + m.run_id + " lacks " + key);
}

std::vector<fs::path> role_dirs(const fs::path& run_dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(run_dir)) return out;
  for (const auto& e : fs::directory_iterator(run_dir))
    if (e.is_directory() && fs::exists(e.path() / "manifest.json") && e.path().filename() != "data")
      out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

struct RoleScores {
  std::string name;
  std::string run_id;
  std::vector<double> scores;
};

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  if (dynamic_cast<const ArtifactError*>(&e)) return kExitMissingArtifact;
  return kExitFailure;
}

bool task_impacting(const synth::ImageSample& s) { return s.hard_flag || (s.artefact_flag && s.artefact_in_roi); }

const std::vector<std::string>& design_decisions() {
  static const std::vector<std::string> items = {
      "Controller gradient: the score-function term is complemented by the exact gradient of the weighted reward "
      "through the validation scores, using per-sample validation losses averaged over the update's steps, centred "
      "and (by default) divided by their standard deviation.",
      "Validation scores are computed once per controller update because the controller is fixed within an update.",
      "Shaped mode adds a squared-error pull of validation scores toward the frozen task-agnostic scores, weighted "
      "by regression_weight times (1 - phi); it vanishes at phi = 1.",
      "Shaped mode also adds the frozen task-agnostic validation scores, centred and standardized, to the pathwise "
      "term with weight (1 - phi) times pathwise_weight; the task term carries weight phi.",
      "Returns: per-sample shaped reward at step t plus the discounted shared task reward of later steps.",
      "Returns are divided by their root-mean-square without centring.",
      "Task-specific mode runs the shaped code path with phi = 1, so both produce identical controller updates.",
      "Retained count is ceil((1 - k) H) and the selective kept count floor((1 - s_rej) M), both guarded against "
      "floating-point representation error.",
      "Early stopping compares the mean reward of the two halves of the last convergence_window updates; a "
      "tolerance <= 0 disables it.",
      "Contingency tables: positive means low quality; A is the task-specific ranking and B the task-agnostic one; "
      "FP is low by A only and FN low by B only.",
      "Task-impact ground truth is a hard case or an artefact inside the region of interest; agreement with a "
      "ground-truth axis uses the bottom fraction equal to that axis's prevalence.",
      "Quadrants split the holdout by bottom-k membership of the phi = 1 and task-agnostic rankings; medians are of "
      "the shaped controller's scores.",
      "Run manifests exclude wall-clock time; run ids hash the resolved configuration and seed.",
  };
  return items;
}

std::string role_dir_name(const TrainerConfig& cfg) {
  std::string name = role_tag(cfg.mode);
  if (cfg.mode == TrainMode::kShaped) name += "_phi" + fmt(cfg.reward.phi);
  if (cfg.reward.strategy == RewardStrategy::kSelective) name += "_srej" + fmt(cfg.reward.s_rej);
  return name;
}

ExperimentConfig effective_config(const CommandOptions& opts, const EnvLookup& env) {
  std::optional<fs::path> path = opts.config;
  if (!path && opts.command == "eval") {
    const fs::path dir = opts.out ? *opts.out : (opts.inputs.empty() ? fs::path() : opts.inputs.front());
    if (!dir.empty() && fs::exists(dir / "config.toml")) path = dir / "config.toml";
  }
  Document doc = path ? parse_document_file(*path) : Document{};
  apply_env_overrides(doc, env);
  ExperimentConfig c = resolve(doc);
  if (opts.seed) c.trainer.seed = *opts.seed;
  if (opts.mode) c.trainer.mode = train_mode_from_string(*opts.mode);
  if (opts.phi) c.trainer.reward.phi = *opts.phi;
  if (opts.srej) {
    c.trainer.reward.s_rej = *opts.srej;
    c.trainer.reward.strategy = RewardStrategy::kSelective;
  }
  if (opts.ks) c.evaluation.ks = *opts.ks;
  if (opts.phis) c.study.phis = *opts.phis;
  if (opts.seeds) c.study.seeds = *opts.seeds;
  if (opts.jobs) c.study.jobs = *opts.jobs;
  if (c.trainer.mode == TrainMode::kShaped && !(c.trainer.reward.phi >= 0.0 && c.trainer.reward.phi <= 1.0))
    throw ConfigError("reward.phi must lie in [0,1]");
  c.validate();
  return c;
}

synth::SplitDataset ensure_dataset(const fs::path& run_dir, const synth::GeneratorConfig& cfg) {
  const fs::path dir = run_dir / "data";
  if (fs::exists(dir / "manifest.json")) {
    auto data = synth::load_dataset(dir);
    if (!(data.config == cfg))
      throw ConfigError("dataset in " + dir.string() + " was generated with a different configuration");
    return data;
  }
  auto data = synth::generate(cfg);
  synth::save_dataset(dir, data);
  return data;
}

namespace {

synth::GeneratorConfig data_config(const ExperimentConfig& cfg) {
  synth::GeneratorConfig g = cfg.data;
  g.seed = cfg.trainer.seed;
  return g;
}

void write_text(const fs::path& path, const std::string& text) {
  auto os = open_out(path);
  os << text;
}

}  // namespace

TrainResult train_role(const fs::path& run_dir, const ExperimentConfig& cfg, const synth::SplitDataset& data,
                       std::ostream& log) {
  const TrainerConfig& tc = cfg.trainer;
  const fs::path dir = run_dir / role_dir_name(tc);
  auto attempt = [&](const TrainerConfig& c, const fs::path& d, const nn::Network* frozen) {
    try {
      const auto checkpoint = [&](std::size_t done, const nn::Network& controller, const nn::Network& predictor) {
        char name[32];
        std::snprintf(name, sizeof name, "update_%06zu", done);
        const fs::path cdir = d / "checkpoints" / name;
        nn::CheckpointMeta meta;
        meta.strings["role"] = role_tag(c.mode);
        meta.numbers["updates"] = static_cast<double>(done);
        nn::save_checkpoint(cdir / "controller", controller, meta);
        meta.strings["role"] = "predictor";
        nn::save_checkpoint(cdir / "predictor", predictor, meta);
      };
      TrainResult r = frozen ? train_shaped(c, data, *frozen, {}, checkpoint) : train_iqa(c, data, {}, checkpoint);
      save_run(d, r, c.mode == TrainMode::kShaped ? c.reward.phi : (c.mode == TrainMode::kTaskAgnostic ? 0.0 : 1.0));
      log << "trained " << d.filename().string() << " run " << r.manifest.run_id << " (" << r.manifest.updates.size()
          << " updates, " << r.manifest.stop_reason << ")\n";
      return r;
    } catch (const std::exception& e) {
      RunManifest m;
      m.config = describe(c);
      m.seed = c.seed;
      m.run_id = make_run_id(m.config, c.seed);
      m.role = role_tag(c.mode);
      m.status = "failed";
      m.stop_reason = e.what();
      write_manifest(d, m);
      throw;
    }
  };
  if (tc.mode != TrainMode::kShaped) return attempt(tc, dir, nullptr);

  TrainerConfig ta = tc;
  ta.mode = TrainMode::kTaskAgnostic;
  ta.reward.phi = 1.0;
  ta.reward.strategy = RewardStrategy::kWeighted;
  ta.reward.s_rej = 0.0;
  const fs::path ta_dir = run_dir / role_dir_name(ta);
  nn::Network frozen;
  bool have = false;
  if (fs::exists(ta_dir / "controller.json")) {
    const auto m = read_manifest(ta_dir);
    if (m.status == "ok" && m.run_id == make_run_id(describe(ta), ta.seed)) {
      frozen = nn::load_checkpoint(ta_dir / "controller").network;
      have = true;
      log << "reusing " << ta_dir.filename().string() << " run " << m.run_id << "\n";
    }
  }
  if (!have) frozen = attempt(ta, ta_dir, nullptr).controller;
  return attempt(tc, dir, &frozen);
}

void evaluate_run(const fs::path& run_dir, const ExperimentConfig& cfg, std::ostream& log) {
  if (!fs::exists(run_dir / "data" / "manifest.json"))
    throw ArtifactError("no dataset in " + run_dir.string() + " (run gen or train first)");
  const auto data = synth::load_dataset(run_dir / "data");
  const auto dirs = role_dirs(run_dir);
  std::vector<RoleScores> scored;
  std::vector<std::size_t> ids;
  for (const auto& s : data.holdout) ids.push_back(s.id);
  std::vector<bool> artefact, hard, impact, clean;
  for (const auto& s : data.holdout) {
    artefact.push_back(s.artefact_flag);
    hard.push_back(s.hard_flag);
    impact.push_back(task_impacting(s));
  }

  for (const auto& dir : dirs) {
    const auto m = read_manifest(dir);
    if (m.status != "ok") {
      log << "skipping " << dir.filename().string() << ": " << m.stop_reason << "\n";
      continue;
    }
    const TaskSpec task = TaskSpec::of_kind(task_kind_from_string(config_value(m, "task.kind")));
    auto ctrl = nn::load_checkpoint(dir / "controller");
    auto pred = nn::load_checkpoint(dir / "predictor");
    const TaskData holdout = make_task_data(task, data.holdout);
    const TrainedPair pair{&ctrl.network, &pred.network};
    const auto curve = rejection_sweep(task, std::span(&pair, 1), holdout, cfg.evaluation.ks);
    write_curve_csv(dir / "curve.csv", curve, m.run_id);
    write_curve_svg(dir / "curve.svg", curve, dir.filename().string(),
                    task.kind == TaskKind::kReconstruction ? "negative MAE" : "performance");
    const auto scores = score(ctrl.network, holdout.inputs);
    {
      auto os = open_out(dir / "scores.csv");
      os << "run_id,sample_id,score\n";
      for (std::size_t i = 0; i < scores.size(); ++i) os << m.run_id << ',' << ids[i] << ',' << fmt(scores[i]) << '\n';
    }
    {
      // Low scores flag samples, so AUCs use negated scores.
      std::vector<double> neg(scores.size());
      for (std::size_t i = 0; i < scores.size(); ++i) neg[i] = -scores[i];
      std::vector<double> sub;
      std::vector<bool> sub_hard;
      for (std::size_t i = 0; i < scores.size(); ++i)
        if (!artefact[i]) {
          sub.push_back(neg[i]);
          sub_hard.push_back(hard[i]);
        }
      auto safe_auc = [](std::span<const double> s, const std::vector<bool>& y) {
        const auto pos = std::count(y.begin(), y.end(), true);
        if (pos == 0 || pos == static_cast<long>(y.size())) return std::nan("");
        return roc_auc(s, y);
      };
      auto os = open_out(dir / "detection.csv");
      os << "run_id,axis,auc\n";
      os << m.run_id << ",artefact," << fmt(safe_auc(neg, artefact)) << '\n';
      os << m.run_id << ",hard_among_artefact_free," << fmt(safe_auc(sub, sub_hard)) << '\n';
      os << m.run_id << ",task_impact," << fmt(safe_auc(neg, impact)) << '\n';
    }
    scored.push_back({dir.filename().string(), m.run_id, scores});
    log << "evaluated " << dir.filename().string() << "\n";
  }

  auto find = [&](const std::string& name) -> const RoleScores* {
    for (const auto& r : scored)
      if (r.name == name) return &r;
    return nullptr;
  };
  const RoleScores* ts = find("task_specific");
  if (!ts) ts = find("shaped_phi1");
  const RoleScores* ta = find("task_agnostic");

  auto prevalence = [](const std::vector<bool>& y) {
    return static_cast<double>(std::count(y.begin(), y.end(), true)) / static_cast<double>(y.size());
  };
  if (ts || ta) {
    auto os = open_out(run_dir / "truth.csv");
    os << "# " << kContingencyConvention << "; b is the ground-truth axis\n";
    os << "run_id,role,axis,k,tp,fp,fn,tn,kappa\n";
    auto row = [&](const RoleScores& r, const std::string& axis, const std::vector<bool>& y) {
      const double k = prevalence(y);
      if (!(k > 0.0 && k < 1.0)) return;
      const auto t = contingency(r.scores, ids, k, y);
      os << r.run_id << ',' << r.name << ',' << axis << ',' << fmt(k) << ',' << t.tp << ',' << t.fp << ',' << t.fn
         << ',' << t.tn << ',' << fmt(cohens_kappa(t)) << '\n';
    };
    if (ts) row(*ts, "task_impact", impact);
    if (ta) row(*ta, "artefact", artefact);
  }
  if (ts && ta) {
    const auto t = contingency(ts->scores, ta->scores, ids, cfg.evaluation.kappa_k, cfg.evaluation.kappa_k);
    write_table_csv(run_dir / "agreement.csv", t, ts->run_id + "+" + ta->run_id);
    log << "kappa(" << ts->name << ", " << ta->name << ") = " << fmt(cohens_kappa(t)) << "\n";
    for (const auto& r : scored) {
      if (r.name.rfind("shaped_phi", 0) != 0) continue;
      const auto q = quadrant_report(ts->scores, ta->scores, r.scores, ids, cfg.evaluation.quadrant_k);
      write_quadrants_csv(run_dir / ("quadrants_" + r.name + ".csv"), q, ids, ts->scores, ta->scores, r.scores,
                          artefact, hard, r.run_id);
    }
  }
}

std::vector<int> run_parallel(const std::vector<std::function<void()>>& tasks, std::size_t jobs, std::ostream& log) {
  std::vector<int> codes(tasks.size(), kExitOk);
  auto guarded = [&](std::size_t i) {
    try {
      tasks[i]();
      return static_cast<int>(kExitOk);
    } catch (const std::exception& e) {
      log << "error: " << e.what() << "\n";
      return exit_code_for(e);
    }
  };
  if (jobs <= 1 || tasks.size() <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) codes[i] = guarded(i);
    return codes;
  }
  log.flush();
  std::map<pid_t, std::size_t> running;
  std::size_t next = 0;
  auto reap = [&]() {
    int status = 0;
    const pid_t pid = ::waitpid(-1, &status, 0);
    if (pid <= 0) throw Error("waitpid failed");
    const auto it = running.find(pid);
    if (it == running.end()) return;
    codes[it->second] = WIFEXITED(status) ? WEXITSTATUS(status) : kExitFailure;
    running.erase(it);
  };
  while (next < tasks.size() || !running.empty()) {
    if (next < tasks.size() && running.size() < jobs) {
      std::cout.flush();
      std::cerr.flush();
      const pid_t pid = ::fork();
      if (pid < 0) throw Error("fork failed");
      if (pid == 0) {
        const int code = guarded(next);
        log.flush();
        std::cout.flush();
        std::cerr.flush();
        ::_exit(code);
      }
      running[pid] = next++;
    } else {
      reap();
    }
  }
  return codes;
}

namespace {

struct CurveRows {
  std::string run_id;
  std::vector<double> ks, means;
  std::vector<std::size_t> retained;
};

CurveRows read_curve(const fs::path& path) {
  CurveRows c;
  for (const auto& row : read_csv(path)) {
    c.run_id = row.at("run_id");
    c.ks.push_back(parse_double(row.at("k"), path));
    c.means.push_back(parse_double(row.at("mean"), path));
    c.retained.push_back(static_cast<std::size_t>(parse_double(row.at("n_retained"), path)));
  }
  return c;
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + v[i];
  return s;
}

}  // namespace

std::vector<std::string> write_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
  std::vector<std::string> missing;
  std::map<std::string, std::vector<CurveRows>> groups;
  std::map<std::string, std::string> metric_label;
  std::vector<std::string> agreement_rows, truth_rows, detection_rows, quadrant_rows;

  auto collect_rows = [](const fs::path& file, std::vector<std::string>& into, const std::string& prefix) {
    std::ifstream is(file);
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
      if (line.empty() || line.front() == '#') continue;
      if (header) {
        header = false;
        continue;
      }
      into.push_back(prefix + line);
    }
  };

  std::vector<fs::path> runs = run_dirs;
  std::sort(runs.begin(), runs.end());
  for (const auto& run : runs) {
    if (!fs::is_directory(run)) {
      missing.push_back(run.string() + ": run directory not found");
      continue;
    }
    // A run directory, or a study root whose children are run directories.
    std::vector<fs::path> candidates;
    if (fs::exists(run / "data" / "manifest.json")) {
      candidates.push_back(run);
    } else {
      for (const auto& e : fs::directory_iterator(run))
        if (e.is_directory() && fs::exists(e.path() / "data" / "manifest.json")) candidates.push_back(e.path());
      std::sort(candidates.begin(), candidates.end());
      if (candidates.empty()) missing.push_back(run.string() + ": no dataset or run directories");
    }
    for (const auto& dir : candidates) {
      const auto roles = role_dirs(dir);
      if (roles.empty()) missing.push_back(dir.string() + ": no trained roles");
      for (const auto& role : roles) {
        const auto m = read_manifest(role);
        if (m.status != "ok") {
          missing.push_back(role.string() + ": training failed (" + m.stop_reason + ")");
          continue;
        }
        if (!fs::exists(role / "curve.csv")) {
          missing.push_back(role.string() + "/curve.csv: not evaluated");
          continue;
        }
        const std::string name = role.filename().string();
        groups[name].push_back(read_curve(role / "curve.csv"));
        metric_label[name] = config_value(m, "task.kind") == "reconstruction" ? "negative MAE" : "performance";
        if (fs::exists(role / "detection.csv")) collect_rows(role / "detection.csv", detection_rows, name + ",");
      }
      const std::string tag = dir.filename().string() + ",";
      if (fs::exists(dir / "agreement.csv")) collect_rows(dir / "agreement.csv", agreement_rows, tag);
      if (fs::exists(dir / "truth.csv")) collect_rows(dir / "truth.csv", truth_rows, tag);
      for (const auto& role : roles) {
        const fs::path q = dir / ("quadrants_" + role.filename().string() + ".csv");
        if (!fs::exists(q)) continue;
        std::array<std::vector<double>, 4> by;
        std::string rid;
        for (const auto& row : read_csv(q)) {
          rid = row.at("run_id");
          const std::string quad = row.at("quadrant");
          const double v = parse_double(row.at("shaped_score"), q);
          for (int i = 0; i < 4; ++i)
            if (quad == to_string(static_cast<Quadrant>(i))) by[static_cast<std::size_t>(i)].push_back(v);
        }
        for (int i = 0; i < 4; ++i) {
          const auto& v = by[static_cast<std::size_t>(i)];
          quadrant_rows.push_back(rid + "," + role.filename().string() + "," + to_string(static_cast<Quadrant>(i)) +
                                  "," + std::to_string(v.size()) + "," + (v.empty() ? std::string("nan") : fmt(median(v))));
        }
      }
    }
  }

  fs::create_directories(out_dir);
  {
    auto os = open_out(out_dir / "curves.csv");
    os << "group,k,mean,std,n_runs,n_retained,run_ids\n";
    for (const auto& [name, curves] : groups) {
      const auto& ks = curves.front().ks;
      bool consistent = true;
      for (const auto& c : curves) consistent = consistent && c.ks == ks;
      if (!consistent) {
        missing.push_back(name + ": runs disagree on the k grid; group skipped");
        continue;
      }
      RejectionCurve agg;
      std::vector<std::string> ids;
      for (const auto& c : curves) ids.push_back(c.run_id);
      for (std::size_t j = 0; j < ks.size(); ++j) {
        CurvePoint p;
        p.k = ks[j];
        for (const auto& c : curves) p.per_run.push_back(c.means[j]);
        p.mean = mean(p.per_run);
        p.std = stddev(p.per_run);
        p.n_retained = curves.front().retained[j];
        agg.points.push_back(p);
        os << name << ',' << fmt(p.k) << ',' << fmt(p.mean) << ',' << fmt(p.std) << ',' << curves.size() << ','
           << p.n_retained << ',' << join(ids, ';') << '\n';
      }
      write_curve_svg(out_dir / ("curve_" + name + ".svg"), agg, name, metric_label[name]);
    }
  }
  auto dump = [&](const std::string& file, const std::string& header, const std::vector<std::string>& rows) {
    auto os = open_out(out_dir / file);
    os << header << '\n';
    for (const auto& r : rows) os << r << '\n';
  };
  dump("agreement.csv", "# " + std::string(kContingencyConvention) + "\nrun_dir,run_id,tp,fp,fn,tn,kappa",
       agreement_rows);
  dump("truth.csv", "run_dir,run_id,role,axis,k,tp,fp,fn,tn,kappa", truth_rows);
  dump("detection.csv", "group,run_id,axis,auc", detection_rows);
  dump("quadrant_summary.csv", "run_id,role,quadrant,n,median_shaped_score", quadrant_rows);
  {
    auto os = open_out(out_dir / "deviations.md");
    os << "# Design decisions\n\n";
    for (const auto& d : design_decisions()) os << "- " << d << '\n';
  }
  {
    auto os = open_out(out_dir / "missing.txt");
    for (const auto& m : missing) os << m << '\n';
  }
  if (groups.empty()) missing.push_back("no completed runs with curves");
  return missing;
}

namespace {

fs::path default_run_dir(const ExperimentConfig& cfg, const std::string& tag) {
  return fs::path(cfg.output.dir) / (timestamp_utc() + "-" + tag);
}

int cmd_gen(const CommandOptions& opts, const ExperimentConfig& cfg, std::ostream& log) {
  const fs::path dir = opts.out ? *opts.out : default_run_dir(cfg, "s" + std::to_string(cfg.trainer.seed));
  fs::create_directories(dir);
  write_text(dir / "config.toml", to_text(cfg));
  ensure_dataset(dir, data_config(cfg));
  log << "dataset " << (dir / "data").string() << " checksum " << synth::dataset_checksum(dir / "data") << "\n";
  return kExitOk;
}

int cmd_train(const CommandOptions& opts, const ExperimentConfig& cfg, std::ostream& log) {
  const fs::path dir = opts.out ? *opts.out : default_run_dir(cfg, "s" + std::to_string(cfg.trainer.seed));
  fs::create_directories(dir);
  write_text(dir / "config.toml", to_text(cfg));
  const auto data = ensure_dataset(dir, data_config(cfg));
  train_role(dir, cfg, data, log);
  log << "run directory " << dir.string() << "\n";
  return kExitOk;
}

int cmd_eval(const CommandOptions& opts, const ExperimentConfig& cfg, std::ostream& log) {
  std::vector<fs::path> dirs = opts.inputs;
  if (opts.out) dirs.insert(dirs.begin(), *opts.out);
  if (dirs.empty()) throw ConfigError("eval needs a run directory (--out DIR or a positional path)");
  for (const auto& d : dirs) {
    if (!fs::is_directory(d)) throw ArtifactError("run directory " + d.string() + " not found");
    evaluate_run(d, cfg, log);
  }
  return kExitOk;
}

int worst(const std::vector<int>& codes) {
  int w = kExitOk;
  for (int c : codes)
    if (c != kExitOk && (w == kExitOk || c > w)) w = c;
  return w;
}

void write_grid(const fs::path& root, const std::string& axis, const std::vector<double>& values,
                const std::vector<std::pair<double, fs::path>>& cells, const std::vector<double>& ks) {
  // cells: (axis value, role dir) for every seed.
  std::map<double, std::vector<CurveRows>> by;
  for (const auto& [v, dir] : cells) by[v].push_back(read_curve(dir / "curve.csv"));
  auto os_long = open_out(root / "grid_long.csv");
  os_long << "run_id," << axis << ",k,mean\n";
  auto os = open_out(root / "grid.csv");
  os << axis;
  for (double k : ks) os << ",k" << fmt(k);
  os << ",run_ids\n";
  for (double v : values) {
    const auto& curves = by[v];
    os << fmt(v);
    std::vector<std::string> ids;
    for (const auto& c : curves) ids.push_back(c.run_id);
    for (std::size_t j = 0; j < ks.size(); ++j) {
      std::vector<double> xs;
      for (const auto& c : curves) {
        xs.push_back(c.means.at(j));
        os_long << c.run_id << ',' << fmt(v) << ',' << fmt(ks[j]) << ',' << fmt(c.means.at(j)) << '\n';
      }
      os << ',' << fmt(mean(xs));
    }
    os << ',' << join(ids, ';') << '\n';
  }
}

int cmd_study(const CommandOptions& opts, const ExperimentConfig& cfg, std::ostream& log) {
  const std::string kind = opts.study_kind;
  if (kind != "shaped" && kind != "srej" && kind != "iqa")
    throw ConfigError("unknown study '" + kind + "' (expected shaped, srej or iqa)");
  const fs::path root = opts.out ? *opts.out : default_run_dir(cfg, "study-" + kind);
  fs::create_directories(root);
  write_text(root / "config.toml", to_text(cfg));
  const std::size_t jobs = cfg.study.jobs;

  auto seed_cfg = [&](std::uint64_t seed) {
    ExperimentConfig c = cfg;
    c.trainer.seed = seed;
    return c;
  };
  auto seed_dir = [&](std::uint64_t seed) { return root / ("seed" + std::to_string(seed)); };

  // Stage 1: datasets and, where needed, the task-agnostic controllers.
  std::vector<std::function<void()>> stage;
  for (auto seed : cfg.study.seeds)
    stage.push_back([&, seed] {
      ExperimentConfig c = seed_cfg(seed);
      const auto data = ensure_dataset(seed_dir(seed), data_config(c));
      write_text(seed_dir(seed) / "config.toml", to_text(c));
      if (kind != "srej") {
        c.trainer.mode = TrainMode::kTaskAgnostic;
        c.trainer.reward = RewardConfig{};
        train_role(seed_dir(seed), c, data, log);
      }
    });
  if (int w = worst(run_parallel(stage, jobs, log)); w != kExitOk) return w;

  // Stage 2: independent cells.
  std::vector<std::function<void()>> cells;
  std::vector<std::pair<double, fs::path>> cell_dirs;
  const std::vector<double>& axis = kind == "shaped" ? cfg.study.phis : cfg.study.s_rejs;
  for (auto seed : cfg.study.seeds) {
    auto add = [&](ExperimentConfig c, double v) {
      cell_dirs.emplace_back(v, seed_dir(seed) / role_dir_name(c.trainer));
      cells.push_back([&, c, seed] {
        const auto data = ensure_dataset(seed_dir(seed), data_config(c));
        train_role(seed_dir(seed), c, data, log);
      });
    };
    if (kind == "iqa") {
      ExperimentConfig c = seed_cfg(seed);
      c.trainer.mode = TrainMode::kTaskSpecific;
      add(c, 1.0);
      continue;
    }
    for (double v : axis) {
      ExperimentConfig c = seed_cfg(seed);
      if (kind == "shaped") {
        c.trainer.mode = TrainMode::kShaped;
        c.trainer.reward.phi = v;
      } else {
        c.trainer.mode = TrainMode::kTaskSpecific;
        c.trainer.reward.strategy = RewardStrategy::kSelective;
        c.trainer.reward.s_rej = v;
      }
      add(c, v);
    }
  }
  if (int w = worst(run_parallel(cells, jobs, log)); w != kExitOk) return w;

  // Stage 3: evaluation per seed.
  std::vector<std::function<void()>> evals;
  for (auto seed : cfg.study.seeds)
    evals.push_back([&, seed] { evaluate_run(seed_dir(seed), seed_cfg(seed), log); });
  if (int w = worst(run_parallel(evals, jobs, log)); w != kExitOk) return w;

  if (kind != "iqa") write_grid(root, kind == "shaped" ? "phi" : "s_rej", axis, cell_dirs, cfg.evaluation.ks);
  log << "study root " << root.string() << "\n";
  return kExitOk;
}

int cmd_report(const CommandOptions& opts, const ExperimentConfig& cfg, std::ostream& log) {
  if (opts.inputs.empty()) throw ConfigError("report needs at least one run directory");
  const fs::path out = opts.out ? *opts.out : default_run_dir(cfg, "report");
  const auto missing = write_report(opts.inputs, out);
  for (const auto& m : missing) log << "missing: " << m << "\n";
  log << "report " << out.string() << "\n";
  return missing.empty() ? kExitOk : kExitMissingArtifact;
}

}  // namespace

int run(const CommandOptions& opts, std::ostream& log, const EnvLookup& env) {
  try {
    const ExperimentConfig cfg = effective_config(opts, env);
    if (opts.command == "gen") return cmd_gen(opts, cfg, log);
    if (opts.command == "train") return cmd_train(opts, cfg, log);
    if (opts.command == "eval") return cmd_eval(opts, cfg, log);
    if (opts.command == "study") return cmd_study(opts, cfg, log);
    if (opts.command == "report") return cmd_report(opts, cfg, log);
    throw ConfigError("unknown command '" + opts.command + "'");
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    log << "error: " << e.what() << "\n";
    // A failure before training starts still leaves a manifest behind.
    if (opts.out && (opts.command == "train" || opts.command == "gen") && !fs::exists(*opts.out / "manifest.json") &&
        role_dirs(*opts.out).empty()) {
      try {
        RunManifest m;
        m.role = opts.command;
        m.status = "failed";
        m.stop_reason = e.what();
        write_manifest(*opts.out, m);
      } catch (const std::exception&) {
      }
    }
    return code;
  }
}

}  // namespace amenable::experiment
