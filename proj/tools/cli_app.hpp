#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "simop/models.hpp"
#include "simop/similarity.hpp"

namespace simop::cli {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

enum Exit : int { exit_pass = 0, exit_usage = 1, exit_parse = 2, exit_condition = 3, exit_oracle = 4, exit_invariant = 5 };

int exit_code_for(ErrorKind k);

struct ModelConfig {
  std::string family;  // first_derivative_integral | involution | dirac | hill
  double theta = 0;
  std::string kernel_name;  // built-in kernel ("sum"); empty when coefficients are given
  models::Coeffs2 kernel;   // first_derivative_integral
  models::Coeffs v;         // involution, hill
  models::Coeffs v1, v2, v3, v4;  // dirac
  int grid_points = 0;      // dirac; 0 means the smallest admissible power of two
};

struct RunConfig {
  ModelConfig model;
  TruncationWindow window;
  PipelineOptions tol;
  std::string pipeline = "auto";
  int split_k = 0;
  bool oracle = true;
  std::string report = "report.json";
  std::string csv_dir = "csv";
  bool svg = false;
  json echo;  // normalised config, defaults filled in
};

// Validates against the schema; unknown keys, bad types and bad values are
// parse_error.  Relative coefficient paths resolve against base_dir.
RunConfig parse_config(const json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

struct Instance {
  Spectrum<cd> spec;
  BlockMatrix<cd> b;           // as assembled
  BlockMatrix<cd> b_pipeline;  // what the pipelines run on (gauge-reduced for dirac)
};

Instance build_instance(const RunConfig& cfg);

struct RunOptions {
  std::optional<std::filesystem::path> out;
  std::uint64_t seed = 1;
  bool quiet = true;
  bool timings = false;      // wall-clock numbers make the report non-reproducible
  bool corrupt_v = false;    // test hook: perturbs V before the gates run
  bool write_files = true;
};

struct Outcome {
  int exit_code = exit_pass;
  json report;
};

Outcome cmd_analyze(const RunConfig& cfg, const RunOptions& opt);
Outcome cmd_split(const RunConfig& cfg, const RunOptions& opt);
Outcome cmd_verify(const RunConfig& cfg, const RunOptions& opt);

int run(int argc, char** argv);

}  // namespace simop::cli
