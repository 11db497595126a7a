#include "partcert/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace partcert {

using nlohmann::json;

namespace {

Eigen::VectorXd vector_from_json(const json& a, const char* what) {
  if (!a.is_array()) throw std::runtime_error(std::string(what) + ": expected an array");
  Eigen::VectorXd v((int)a.size());
  for (int i = 0; i < (int)a.size(); ++i) {
    if (!a[i].is_number()) throw std::runtime_error(std::string(what) + ": non-numeric entry");
    v(i) = a[i].get<double>();
  }
  return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

void require_version(const json& j, const char* what) {
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"] != 1)
    throw std::runtime_error(std::string(what) + ": missing or unsupported version (want 1)");
}

}  // namespace

std::string network_to_json(const ReluNetwork& net) {
  net.validate();
  json j;
  j["version"] = 1;
  j["layers"] = json::array();
  for (const Layer& layer : net.layers) {
    json rows = json::array();
    for (int r = 0; r < layer.W.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < layer.W.cols(); ++c) row.push_back(layer.W(r, c));
      rows.push_back(std::move(row));
    }
    j["layers"].push_back({{"weights", std::move(rows)}, {"bias", vector_to_json(layer.b)}});
  }
  return j.dump(2) + "\n";
}

ReluNetwork network_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("network file: ") + e.what());
  }
  require_version(j, "network file");
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty())
    throw std::runtime_error("network file: needs a non-empty layers array");

  ReluNetwork net;
  int k = 0;
  for (const json& jl : j["layers"]) {
    const std::string at = "network file layer " + std::to_string(k);
    if (!jl.is_object() || !jl.contains("weights"))
      throw std::runtime_error(at + ": needs a weights field");
    const json& wj = jl["weights"];
    if (!wj.is_array() || wj.empty()) throw std::runtime_error(at + ": weights must be a non-empty array");
    const int rows = (int)wj.size();
    if (!wj[0].is_array() || wj[0].empty())
      throw std::runtime_error(at + ": weight rows must be non-empty arrays");
    const int cols = (int)wj[0].size();
    Layer layer;
    layer.W.resize(rows, cols);
    for (int r = 0; r < rows; ++r) {
      if (!wj[r].is_array() || (int)wj[r].size() != cols)
        throw std::runtime_error(at + ": ragged weight rows");
      for (int c = 0; c < cols; ++c) {
        if (!wj[r][c].is_number()) throw std::runtime_error(at + ": non-numeric weight");
        layer.W(r, c) = wj[r][c].get<double>();
      }
    }
    if (jl.contains("bias")) {
      layer.b = vector_from_json(jl["bias"], at.c_str());
      if (layer.b.size() != rows) throw std::runtime_error(at + ": bias size mismatch");
    } else {
      layer.b = Eigen::VectorXd::Zero(rows);
    }
    net.layers.push_back(std::move(layer));
    ++k;
  }
  try {
    net.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("network file: ") + e.what());
  }
  return net;
}

void save_network(const std::string& path, const ReluNetwork& net) {
  write_text_file(path, network_to_json(net));
}

ReluNetwork load_network(const std::string& path) {
  return network_from_json(read_text_file(path));
}

CertProblem problem_from_json(const std::string& text, const ReluNetwork& net) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("problem file: ") + e.what());
  }
  require_version(j, "problem file");
  net.validate();

  CertProblem p;
  p.net = net;

  Eigen::VectorXd nominal;
  if (j.contains("nominal")) {
    nominal = vector_from_json(j["nominal"], "problem file nominal");
    if (!j.contains("epsilon") || !j["epsilon"].is_number())
      throw std::runtime_error("problem file: nominal needs a numeric epsilon");
    p.input = polytope_from_box(box_from_nominal(nominal, j["epsilon"].get<double>()));
  } else if (j.contains("lower") && j.contains("upper")) {
    BoxSet box;
    box.lower = vector_from_json(j["lower"], "problem file lower");
    box.upper = vector_from_json(j["upper"], "problem file upper");
    p.input = polytope_from_box(box);
  } else {
    throw std::runtime_error("problem file: needs nominal+epsilon or lower+upper");
  }
  if (p.input.dim() != net.input_dim())
    throw std::runtime_error("problem file: input set dimension does not match the network");

  if (j.contains("halfspaces")) {
    if (!j["halfspaces"].is_array())
      throw std::runtime_error("problem file: halfspaces must be an array");
    for (const json& hj : j["halfspaces"]) {
      if (!hj.is_object() || !hj.contains("a") || !hj.contains("beta") || !hj["beta"].is_number())
        throw std::runtime_error("problem file: each halfspace needs fields a and beta");
      Halfspace h;
      h.a = vector_from_json(hj["a"], "problem file halfspace");
      h.beta = hj["beta"].get<double>();
      if (h.a.size() != net.input_dim())
        throw std::runtime_error("problem file: halfspace dimension mismatch");
      p.input.halfspaces.push_back(std::move(h));
    }
  }

  if (j.contains("cost")) {
    p.c = vector_from_json(j["cost"], "problem file cost");
    if (p.c.size() != net.output_dim())
      throw std::runtime_error("problem file: cost dimension does not match the network");
  } else if (j.contains("challenger")) {
    if (!j["challenger"].is_number_integer())
      throw std::runtime_error("problem file: challenger must be an integer label");
    const int ch = j["challenger"].get<int>();
    if (j.contains("nominal_label")) {
      const int lab = j["nominal_label"].get<int>();
      if (lab < 0 || lab >= net.output_dim() || ch < 0 || ch >= net.output_dim())
        throw std::runtime_error("problem file: label out of range");
      if (lab == ch) throw std::runtime_error("problem file: challenger equals the nominal label");
      p.c = Eigen::VectorXd::Zero(net.output_dim());
      p.c(ch) = 1.0;
      p.c(lab) = -1.0;
    } else {
      if (nominal.size() == 0)
        throw std::runtime_error("problem file: challenger without nominal_label needs a nominal point");
      p.c = classification_cost(forward_eval(net, nominal), ch);
    }
  } else {
    throw std::runtime_error("problem file: needs a cost vector or a challenger label");
  }

  if (j.contains("threshold")) {
    if (!j["threshold"].is_number()) throw std::runtime_error("problem file: threshold must be numeric");
    p.d = j["threshold"].get<double>();
  }
  p.validate();
  return p;
}

CertProblem load_problem(const std::string& path, const ReluNetwork& net) {
  return problem_from_json(read_text_file(path), net);
}

std::string problem_to_json(const CertProblem& problem) {
  problem.validate();
  json j;
  j["version"] = 1;
  j["lower"] = vector_to_json(problem.input.box.lower);
  j["upper"] = vector_to_json(problem.input.box.upper);
  if (!problem.input.halfspaces.empty()) {
    j["halfspaces"] = json::array();
    for (const Halfspace& h : problem.input.halfspaces)
      j["halfspaces"].push_back({{"a", vector_to_json(h.a)}, {"beta", h.beta}});
  }
  j["cost"] = vector_to_json(problem.c);
  j["threshold"] = problem.d;
  return j.dump(2) + "\n";
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  Dataset ds;
  std::vector<std::vector<double>> feats;
  std::string line;
  int lineno = 0, width = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() < 2)
      throw std::runtime_error("dataset line " + std::to_string(lineno) + ": too few fields");
    bool header = false;
    std::vector<double> row;
    for (size_t i = 0; i + 1 < fields.size(); ++i) {
      try {
        size_t used = 0;
        row.push_back(std::stod(fields[i], &used));
        if (used != fields[i].size()) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        if (lineno == 1 && feats.empty()) {
          header = true;
          break;
        }
        throw std::runtime_error("dataset line " + std::to_string(lineno) +
                                 ": non-numeric feature '" + fields[i] + "'");
      }
    }
    if (header) continue;
    if (width < 0) width = (int)row.size();
    if ((int)row.size() != width)
      throw std::runtime_error("dataset line " + std::to_string(lineno) + ": inconsistent width");
    const std::string& label = fields.back();
    int id = -1;
    for (size_t k = 0; k < ds.names.size(); ++k)
      if (ds.names[k] == label) id = (int)k;
    if (id < 0) {
      id = (int)ds.names.size();
      ds.names.push_back(label);
    }
    ds.labels.push_back(id);
    feats.push_back(std::move(row));
  }
  if (feats.empty()) throw std::runtime_error("dataset has no data rows: " + path);
  ds.features.resize((int)feats.size(), width);
  for (int r = 0; r < (int)feats.size(); ++r)
    for (int c = 0; c < width; ++c) ds.features(r, c) = feats[r][c];
  return ds;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return json(v).dump();
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  auto check_cell = [](const std::string& s) {
    if (s.find_first_of(",\"\n") != std::string::npos)
      throw std::invalid_argument("csv cell needs quoting, which this writer refuses: " + s);
  };
  std::ostringstream out;
  for (size_t i = 0; i < header.size(); ++i) {
    check_cell(header[i]);
    out << (i ? "," : "") << header[i];
  }
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw std::invalid_argument("csv row width mismatch");
    for (size_t i = 0; i < row.size(); ++i) {
      check_cell(row[i]);
      out << (i ? "," : "") << row[i];
    }
    out << "\n";
  }
  write_text_file(path, out.str());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace partcert
