#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "partcert/network.hpp"
#include "partcert/sets.hpp"

namespace partcert {

/* Network file format (json, version 1):
 *   {"version": 1,
 *    "layers": [{"weights": [[...], ...], "bias": [...]}, ...]}
 * weights are row-major nested arrays; bias may be omitted (zeros).  The
 * loader rejects ragged weight rows, size mismatches, and bad versions. */
std::string network_to_json(const ReluNetwork& net);
ReluNetwork network_from_json(const std::string& text);
void save_network(const std::string& path, const ReluNetwork& net);
ReluNetwork load_network(const std::string& path);

/* Problem file format (json, version 1).  The input set is either
 *   {"nominal": [...], "epsilon": e}   or   {"lower": [...], "upper": [...]}
 * with optional "halfspaces": [{"a": [...], "beta": b}].  The cost is either
 * {"cost": [...]} or 0-based labels {"challenger": j} (optionally with
 * "nominal_label": i; when omitted the label is argmax f(nominal)).  An
 * optional "threshold" maps to CertProblem.d. */
CertProblem problem_from_json(const std::string& text, const ReluNetwork& net);
CertProblem load_problem(const std::string& path, const ReluNetwork& net);
std::string problem_to_json(const CertProblem& problem);

struct Dataset {
  Eigen::MatrixXd features;        // one sample per row
  std::vector<int> labels;         // 0-based class ids, in first-seen order
  std::vector<std::string> names;  // class id -> label text from the file
};

/* Comma-separated rows of numeric features ending in a class label; a header
 * line is skipped when its first field is not numeric. */
Dataset load_dataset_csv(const std::string& path);

/* Shortest decimal form that round-trips the double (json-style). */
std::string format_double(double v);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace partcert
