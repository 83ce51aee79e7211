/**
 * @file io.hpp
 * @brief Run-directory persistence: steps.csv (fixed 34-column schema),
 *        diagnostics sidecar, manifest, plain-text field snapshots,
 *        dataset assembly from run directories, and the model file.
 */

#ifndef SCFRP_IO_HPP
#define SCFRP_IO_HPP

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "scfrp/config.hpp"
#include "scfrp/fracture.hpp"
#include "scfrp/shm.hpp"
#include "scfrp/simulate.hpp"

namespace scfrp {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pair column names g_12 ... g_78 in lexicographic order.
inline std::vector<std::string> conductance_columns() {
  std::vector<std::string> cols;
  for (int i = 1; i <= 8; ++i)
    for (int j = i + 1; j <= 8; ++j)
      cols.push_back("g_" + std::to_string(i) + std::to_string(j));
  return cols;
}

inline std::string steps_csv_header() {
  std::string h = "step,time_s,disp_mm,force_N,a_tilde,C_tilde";
  for (const auto& c : conductance_columns()) h += "," + c;
  return h;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10e", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

}  // namespace detail

/// steps.csv writer with the stable 34-column layout.
class StepsCsvWriter {
 public:
  explicit StepsCsvWriter(const fs::path& path) : out_(path) {
    if (!out_) throw IoError("cannot open " + path.string());
    out_ << steps_csv_header() << "\n";
  }

  void write(const StepRecord& rec) {
    out_ << rec.step << "," << detail::fmt(rec.time) << "," << detail::fmt(rec.disp) << ","
         << detail::fmt(rec.force) << "," << detail::fmt(rec.a_tilde) << ","
         << detail::fmt(rec.c_tilde);
    for (double g : rec.ratios) out_ << "," << detail::fmt(g);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

inline void write_diagnostics_csv(const fs::path& path, const std::vector<StepRecord>& recs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  out << "step,x_tip_mm,force_bottom_N,newton_iters,stagger_passes,reductions\n";
  for (const auto& r : recs) {
    out << r.step << "," << detail::fmt(r.x_tip) << "," << detail::fmt(r.force_bottom) << ","
        << r.newton_iters << "," << r.stagger_passes << "," << r.reductions << "\n";
  }
}

inline void write_manifest(const fs::path& path, const RunConfig& rc, bool terminated_early,
                           int n_steps) {
  Json doc;
  doc["case"] = rc.case_name;
  doc["role"] = rc.role;
  doc["descriptors"] = {{"A11", rc.a11}, {"A12", rc.a12}, {"vf", rc.vf},
                        {"theta_K", rc.setup.theta}};
  doc["seed"] = rc.seed;
  doc["geometry_W"] = rc.setup.mesh.W;
  doc["terminated_early"] = terminated_early;
  doc["n_steps"] = n_steps;
  doc["config"] = rc.resolved;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  out << doc.dump(2) << "\n";
}

/// Plain-text field snapshot: node table, element table, then per-node
/// displacement, phase field and two electrode-pair potentials.
inline void write_snapshot(const fs::path& path, const Mesh& m, const FieldSnapshot& snap) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  out << "# field snapshot at disp_mm=" << detail::fmt(snap.disp) << " step=" << snap.step << "\n";
  out << "nodes " << m.n_nodes() << "\n";
  out << "# id x_mm y_mm ux_mm uy_mm phi phi_e_15_V phi_e_37_V\n";
  for (int i = 0; i < m.n_nodes(); ++i) {
    out << i << " " << detail::fmt(m.nodes[i].x()) << " " << detail::fmt(m.nodes[i].y()) << " "
        << detail::fmt(snap.u(2 * i)) << " " << detail::fmt(snap.u(2 * i + 1)) << " "
        << detail::fmt(snap.phi(i)) << " " << detail::fmt(snap.phi_e_15(i)) << " "
        << detail::fmt(snap.phi_e_37(i)) << "\n";
  }
  out << "elements " << m.n_elems() << "\n";
  out << "# id n0 n1 n2 n3\n";
  for (int e = 0; e < m.n_elems(); ++e) {
    const auto& c = m.elems[e];
    out << e << " " << c[0] << " " << c[1] << " " << c[2] << " " << c[3] << "\n";
  }
}

/// Execute one configured run and persist the full run directory.
inline RunResult execute_run(const RunConfig& rc, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  StepsCsvWriter steps(out_dir / "steps.csv");
  std::vector<StepRecord> all;
  SimSetup setup = rc.setup;
  const RunResult rr = run_simulation(setup, [&](const StepRecord& rec) { (void)rec; });
  for (const auto& rec : rr.records) steps.write(rec);
  write_diagnostics_csv(out_dir / "diagnostics.csv", rr.records);
  write_manifest(out_dir / "manifest.json", rc, rr.terminated_early,
                 static_cast<int>(rr.records.size()) - 1);
  if (!rr.snapshots.empty()) {
    fs::create_directories(out_dir / "snapshots");
    for (const auto& snap : rr.snapshots) {
      char name[64];
      std::snprintf(name, sizeof(name), "snapshot_step%04d.txt", snap.step);
      write_snapshot(out_dir / "snapshots" / name, setup.mesh, snap);
    }
  }
  return rr;
}

/// Read one run directory back into dataset rows. Fully fractured steps
/// (crack tip at or beyond the far edge) are dropped; the step-0 reference
/// row is kept.
inline std::vector<ShmRecord> read_run_directory(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  const fs::path steps_path = dir / "steps.csv";
  const fs::path diag_path = dir / "diagnostics.csv";
  if (!fs::exists(manifest_path)) throw IoError("missing " + manifest_path.string());
  if (!fs::exists(steps_path)) throw IoError("missing " + steps_path.string());

  const Json manifest = load_json_file(manifest_path.string());
  ShmRecord proto;
  proto.case_name = manifest.at("case").get<std::string>();
  proto.role = manifest.at("role").get<std::string>();
  proto.a11 = manifest.at("descriptors").at("A11").get<double>();
  proto.a12 = manifest.at("descriptors").at("A12").get<double>();
  proto.vf = manifest.at("descriptors").at("vf").get<double>();
  proto.theta = manifest.at("descriptors").at("theta_K").get<double>();
  const double w = manifest.value("geometry_W", 1.0);

  // crack-tip positions per step from the diagnostics sidecar
  std::map<int, double> xtip;
  if (fs::exists(diag_path)) {
    std::ifstream diag(diag_path);
    std::string line;
    std::getline(diag, line);
    while (std::getline(diag, line)) {
      if (line.empty()) continue;
      const auto f = detail::split_csv_line(line);
      if (f.size() < 2) throw IoError(diag_path.string() + ": malformed row");
      xtip[std::stoi(f[0])] = std::stod(f[1]);
    }
  }

  std::ifstream in(steps_path);
  std::string header;
  std::getline(in, header);
  if (header != steps_csv_header())
    throw IoError(steps_path.string() + ": unexpected column layout");
  std::vector<ShmRecord> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 34) throw IoError(steps_path.string() + ": expected 34 columns");
    ShmRecord r = proto;
    r.step = std::stoi(f[0]);
    r.a_tilde = std::stod(f[4]);
    r.c_tilde = std::stod(f[5]);
    for (int g = 0; g < 28; ++g) r.g_ratios[g] = std::stod(f[6 + g]);
    const auto it = xtip.find(r.step);
    if (it != xtip.end() && it->second >= w - 1e-12) continue;  // fully fractured
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Scan a sweep root for run directories (identified by manifest.json).
inline std::vector<ShmRecord> assemble_dataset(const fs::path& root) {
  std::vector<fs::path> dirs;
  if (fs::exists(root / "manifest.json")) {
    dirs.push_back(root);
  } else {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
        dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw IoError("no run directories under " + root.string());
  std::vector<ShmRecord> rows;
  for (const auto& d : dirs) {
    auto part = read_run_directory(d);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

inline std::string dataset_csv_header() {
  std::string h = "case,role,step,A11,A12,vf,theta_K";
  for (const auto& c : conductance_columns()) h += "," + c;
  return h + ",a_tilde,C_tilde";
}

inline void write_dataset_csv(const fs::path& path, const std::vector<ShmRecord>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  out << dataset_csv_header() << "\n";
  for (const auto& r : rows) {
    out << r.case_name << "," << r.role << "," << r.step << "," << detail::fmt(r.a11) << ","
        << detail::fmt(r.a12) << "," << detail::fmt(r.vf) << "," << detail::fmt(r.theta);
    for (double g : r.g_ratios) out << "," << detail::fmt(g);
    out << "," << detail::fmt(r.a_tilde) << "," << detail::fmt(r.c_tilde) << "\n";
  }
}

inline std::vector<ShmRecord> read_dataset_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  if (header != dataset_csv_header())
    throw IoError(path.string() + ": unexpected column layout");
  std::vector<ShmRecord> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 37) throw IoError(path.string() + ": expected 37 columns");
    ShmRecord r;
    r.case_name = f[0];
    r.role = f[1];
    r.step = std::stoi(f[2]);
    r.a11 = std::stod(f[3]);
    r.a12 = std::stod(f[4]);
    r.vf = std::stod(f[5]);
    r.theta = std::stod(f[6]);
    for (int g = 0; g < 28; ++g) r.g_ratios[g] = std::stod(f[7 + g]);
    r.a_tilde = std::stod(f[35]);
    r.c_tilde = std::stod(f[36]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Json stats_to_json(const ZScoreStats& st) {
  Json j;
  j["mean"] = std::vector<double>(st.mean.data(), st.mean.data() + st.mean.size());
  j["std"] = std::vector<double>(st.stdev.data(), st.stdev.data() + st.stdev.size());
  j["provenance"] = st.provenance;
  return j;
}

inline ZScoreStats stats_from_json(const Json& j) {
  ZScoreStats st;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto stdev = j.at("std").get<std::vector<double>>();
  st.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
  st.stdev = Eigen::Map<const Eigen::VectorXd>(stdev.data(), stdev.size());
  st.provenance = j.value("provenance", "");
  return st;
}

/// Self-describing model document: layer sizes, activations, row-major
/// weights, biases, normalization statistics and training metadata.
inline void save_model(const fs::path& path, const Network& net, const TrainConfig& cfg) {
  Json doc;
  doc["layers"] = {net.n_in, Network::kHidden, Network::kHidden, 2};
  doc["activations"] = {"tanh", "tanh", "linear"};
  doc["n_in"] = net.n_in;
  auto mat = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) rows[r][c] = m(r, c);
    return rows;
  };
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  doc["weights"] = {{"w1", mat(net.w1)}, {"w2", mat(net.w2)}, {"w3", mat(net.w3)}};
  doc["biases"] = {{"b1", vec(net.b1)}, {"b2", vec(net.b2)}, {"b3", vec(net.b3)}};
  doc["normalization"] = {{"input", stats_to_json(net.in_stats)},
                          {"output", stats_to_json(net.out_stats)}};
  doc["training"] = {{"seed", net.seed},
                     {"epochs_run", net.epochs_run},
                     {"best_epoch", net.best_epoch},
                     {"val_fraction", cfg.val_fraction},
                     {"patience", cfg.patience},
                     {"max_epochs", cfg.max_epochs},
                     {"holdout", net.holdout}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  out << doc.dump(2) << "\n";
}

inline Network load_model(const fs::path& path, TrainConfig* cfg_out = nullptr) {
  const Json doc = load_json_file(path.string());
  Network net;
  net.n_in = doc.at("n_in").get<int>();
  auto mat = [](const Json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    return m;
  };
  auto vec = [](const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
  };
  net.w1 = mat(doc.at("weights").at("w1"));
  net.w2 = mat(doc.at("weights").at("w2"));
  net.w3 = mat(doc.at("weights").at("w3"));
  net.b1 = vec(doc.at("biases").at("b1"));
  net.b2 = vec(doc.at("biases").at("b2"));
  net.b3 = vec(doc.at("biases").at("b3"));
  net.in_stats = stats_from_json(doc.at("normalization").at("input"));
  net.out_stats = stats_from_json(doc.at("normalization").at("output"));
  const Json tr = doc.value("training", Json::object());
  net.seed = tr.value("seed", 0u);
  net.epochs_run = tr.value("epochs_run", 0);
  net.best_epoch = tr.value("best_epoch", -1);
  net.holdout = tr.value("holdout", std::vector<std::string>{});
  if (cfg_out) {
    cfg_out->seed = net.seed;
    cfg_out->val_fraction = tr.value("val_fraction", 0.15);
    cfg_out->patience = tr.value("patience", 20);
    cfg_out->max_epochs = tr.value("max_epochs", 1000);
  }
  return net;
}

}  // namespace scfrp

#endif  // SCFRP_IO_HPP
