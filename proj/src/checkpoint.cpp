#include <fstream>

#include "json.hpp"
#include "vpf/error.hpp"
#include "vpf/model.hpp"

namespace vpf::model {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json tensor_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.flat().begin(), m.flat().end())}};
}

Matrix tensor_from_json(const json& j, const std::string& name) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != rows * cols) throw Error(ErrorKind::Schema, "tensor " + name + ": data length mismatch");
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

json arch_to_json(const ArchitectureSpec& a) {
  return json{{"lstm_units", a.lstm_units}, {"dense1", a.dense1},       {"dense2", a.dense2},
              {"output_dim", a.output_dim}, {"feat_dim", a.feat_dim},   {"lookback", a.lookback},
              {"dropout", a.dropout},       {"recurrent_dropout", a.recurrent_dropout},
              {"leaky_alpha", a.leaky_alpha}};
}

ArchitectureSpec arch_from_json(const json& j) {
  ArchitectureSpec a;
  a.lstm_units = j.at("lstm_units").get<std::size_t>();
  a.dense1 = j.at("dense1").get<std::size_t>();
  a.dense2 = j.at("dense2").get<std::size_t>();
  a.output_dim = j.at("output_dim").get<std::size_t>();
  a.feat_dim = j.at("feat_dim").get<std::size_t>();
  a.lookback = j.at("lookback").get<std::size_t>();
  a.dropout = j.at("dropout").get<double>();
  a.recurrent_dropout = j.at("recurrent_dropout").get<double>();
  a.leaky_alpha = j.at("leaky_alpha").get<double>();
  return a;
}

json preprocess_to_json(const ModelParams& m, const std::optional<prep::QuantileScaler>& scaler) {
  json j{{"power_zscore", {{"mean", m.power_z.mean}, {"std", m.power_z.std}}},
         {"feature_zscore", {{"mean", m.feature_z.mean}, {"std", m.feature_z.std}}}};
  if (scaler)
    j["quantile_scaler"] = {{"q_low", scaler->q_low},
                            {"q_high", scaler->q_high},
                            {"level_low", scaler->level_low},
                            {"level_high", scaler->level_high}};
  return j;
}

void write_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const ModelParams& m = ckpt.model;
  m.validate();
  json tensors = json::object();
  const auto names = ModelParams::tensor_names();
  const auto ts = m.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) tensors[names[i]] = tensor_to_json(*ts[i]);
  json j{{"format", "vpf-checkpoint"},
         {"version", kFormatVersion},
         {"architecture", arch_to_json(m.arch)},
         {"tensors", tensors},
         {"preprocess", preprocess_to_json(m, ckpt.eval_scaler)}};
  if (ckpt.optimizer) {
    const auto& s = *ckpt.optimizer;
    json moments = json::object();
    for (std::size_t i = 0; i < s.m.size(); ++i)
      moments[names[i]] = {{"m", tensor_to_json(s.m[i])}, {"v", tensor_to_json(s.v[i])}};
    j["optimizer"] = {{"kind", "adam"}, {"lr", s.lr},   {"beta1", s.beta1},    {"beta2", s.beta2},
                      {"eps", s.eps},   {"t", s.t},     {"moments", moments}};
  }
  write_json(path, j);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, "checkpoint " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format") != "vpf-checkpoint" || j.at("version").get<int>() != kFormatVersion)
      throw Error(ErrorKind::Schema, "unsupported checkpoint format in " + path.string());
    Checkpoint ckpt;
    ModelParams& m = ckpt.model;
    m.arch = arch_from_json(j.at("architecture"));
    const auto names = ModelParams::tensor_names();
    auto ts = m.tensors();
    for (std::size_t i = 0; i < ts.size(); ++i) *ts[i] = tensor_from_json(j.at("tensors").at(names[i]), names[i]);
    const auto& pre = j.at("preprocess");
    m.power_z.mean = pre.at("power_zscore").at("mean").get<std::vector<double>>();
    m.power_z.std = pre.at("power_zscore").at("std").get<std::vector<double>>();
    m.feature_z.mean = pre.at("feature_zscore").at("mean").get<std::vector<double>>();
    m.feature_z.std = pre.at("feature_zscore").at("std").get<std::vector<double>>();
    if (pre.contains("quantile_scaler")) {
      const auto& q = pre.at("quantile_scaler");
      ckpt.eval_scaler = prep::QuantileScaler{q.at("q_low").get<double>(), q.at("q_high").get<double>(),
                                              q.at("level_low").get<double>(), q.at("level_high").get<double>()};
    }
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      nn::AdamState s;
      s.lr = o.at("lr").get<double>();
      s.beta1 = o.at("beta1").get<double>();
      s.beta2 = o.at("beta2").get<double>();
      s.eps = o.at("eps").get<double>();
      s.t = o.at("t").get<std::uint64_t>();
      for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& mm = o.at("moments").at(names[i]);
        s.m.push_back(tensor_from_json(mm.at("m"), names[i]));
        s.v.push_back(tensor_from_json(mm.at("v"), names[i]));
      }
      ckpt.optimizer = std::move(s);
    }
    m.validate();
    return ckpt;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, "checkpoint " + path.string() + ": " + e.what());
  }
}

void save_preprocess_sidecar(const std::filesystem::path& path, const ModelParams& model,
                             const std::optional<prep::QuantileScaler>& scaler) {
  write_json(path, preprocess_to_json(model, scaler));
}

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "epoch,train_loss,val_loss\n";
  for (const auto& e : history) out << e.epoch << ',' << json(e.train_loss).dump() << ',' << json(e.val_loss).dump() << '\n';
}

}  // namespace vpf::model
