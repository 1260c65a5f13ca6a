#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "amenable/synthdata.hpp"
#include "amenable/trainer.hpp"

namespace amenable::experiment {

/// A parsed scalar or list. Integers are kept apart from reals so "3" can
/// bind to a count and "3.0" cannot.
struct Value {
  using List = std::vector<Value>;
  std::variant<bool, std::int64_t, double, std::string, List> data;
  /// 1-based line in the source; 0 for values that did not come from a file.
  std::size_t line = 0;
  std::string source;

  std::string where() const;
};

/// Dotted key ("trainer.max_updates") to value.
using Document = std::map<std::string, Value>;

/// Parses the sectioned key-value format:
///   # comment
///   [section] or [section.sub]
///   key = 12 | -0.5 | 1e-3 | true | "text" | [1, 2, 3]
/// Throws ConfigError naming the source and line.
Document parse_document(const std::string& text, const std::string& source = "<string>");
Document parse_document_file(const std::filesystem::path& path);

/// Parses one value in the same grammar (used for environment overrides).
Value parse_value(const std::string& text, const std::string& source);

struct EvaluationConfig {
  std::vector<double> ks{0.0, 0.05, 0.1, 0.15, 0.2, 0.25};
  /// Bottom fraction used for agreement tables between rankings.
  double kappa_k = 0.1;
  /// Bottom fraction used for the quadrant split.
  double quadrant_k = 0.1;
};

struct StudyConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<double> phis{0.0, 0.85, 0.95, 1.0};
  std::vector<double> s_rejs{0.0, 0.1, 0.2, 0.3};
  std::size_t jobs = 1;
};

struct OutputConfig {
  /// Parent of timestamped run directories when --out is not given.
  std::string dir = "runs";
};

struct ExperimentConfig {
  synth::GeneratorConfig data;
  TrainerConfig trainer;
  EvaluationConfig evaluation;
  StudyConfig study;
  OutputConfig output;

  /// Throws ConfigError.
  void validate() const;
};

/// Defaults with the validated contents of `doc` applied. Unknown keys and
/// type mismatches raise ConfigError with the key path and line.
ExperimentConfig resolve(const Document& doc);

/// Applies AMENABLE_<SECTION>_<KEY> variables (dots become underscores,
/// upper case) on top of `doc`. `getenv` is injectable for tests.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
void apply_env_overrides(Document& doc, const EnvLookup& getenv);
EnvLookup process_env();

/// Every accepted dotted key, in documentation order.
std::vector<std::string> known_keys();
std::string env_name(const std::string& dotted_key);

/// Fully resolved configuration in the same format; parsing it back gives an
/// equal configuration.
std::string to_text(const ExperimentConfig& cfg);

/// parse_document_file + env overrides + resolve + validate.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& getenv);

}  // namespace amenable::experiment
