#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "spcit/tdqr.hpp"

namespace spcit::tdqr {

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::json config_to_json(const DecoderConfig& c) {
  return {{"d_model", c.d_model},
          {"n_heads", c.n_heads},
          {"n_layers", c.n_layers},
          {"d_ff", c.ff_dim()},
          {"dropout", c.dropout},
          {"window", c.window},
          {"input_dim", c.input_dim},
          {"quantile_levels", c.quantile_levels},
          {"seed", c.seed},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"additional_training", c.additional_training}};
}

DecoderConfig config_from_json(const nlohmann::json& j) {
  DecoderConfig c;
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.window = j.at("window").get<std::size_t>();
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.quantile_levels = j.at("quantile_levels").get<std::vector<double>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.value("patience", std::size_t{0});
  c.additional_training = j.value("additional_training", false);
  return c;
}

}  // namespace

void save_checkpoint(const QuantileModel& model, const CheckpointMetadata& meta,
                     const std::filesystem::path& path) {
  const auto values = model.weights.values();
  const nlohmann::json doc = {
      {"format", "spcit-tdqr"},
      {"version", kCheckpointVersion},
      {"config", config_to_json(model.weights.config())},
      {"standardizer", {{"mean", model.standardizer.mean}, {"scale", model.standardizer.scale}}},
      {"parameter_count", values.size()},
      {"parameters", std::vector<double>(values.begin(), values.end())},
      {"training",
       {{"best_epoch", meta.best_epoch},
        {"best_val_loss", meta.best_val_loss},
        {"epochs_run", meta.epochs_run},
        {"note", meta.note}}}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

QuantileModel load_checkpoint(const std::filesystem::path& path, CheckpointMetadata* meta) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  const auto doc = nlohmann::json::parse(in);
  if (doc.value("format", "") != "spcit-tdqr") {
    throw ValidationError("load_checkpoint: " + path.string() + " is not a tdqr checkpoint");
  }
  if (doc.value("version", 0) != kCheckpointVersion) {
    throw ValidationError("load_checkpoint: unsupported checkpoint version");
  }
  DecoderWeights weights(config_from_json(doc.at("config")));
  const auto params = doc.at("parameters").get<std::vector<double>>();
  if (params.size() != weights.values().size()) {
    throw StructuralError("load_checkpoint: parameter count does not match the config");
  }
  std::copy(params.begin(), params.end(), weights.values().begin());

  Standardizer standardizer;
  standardizer.mean = doc.at("standardizer").at("mean").get<std::vector<double>>();
  standardizer.scale = doc.at("standardizer").at("scale").get<std::vector<double>>();
  if (standardizer.mean.size() != weights.config().input_dim ||
      standardizer.scale.size() != weights.config().input_dim) {
    throw StructuralError("load_checkpoint: standardizer width does not match input_dim");
  }
  if (meta != nullptr) {
    const auto& t = doc.at("training");
    meta->best_epoch = t.at("best_epoch").get<std::size_t>();
    meta->best_val_loss = t.at("best_val_loss").get<double>();
    meta->epochs_run = t.at("epochs_run").get<std::size_t>();
    meta->note = t.value("note", "");
  }
  return QuantileModel{std::move(weights), std::move(standardizer)};
}

void write_loss_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_loss_csv: cannot open " + path.string());
  out << "epoch,train_loss,val_loss,phase\n";
  char buf[128];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%s\n", r.epoch, r.train_loss, r.val_loss,
                  r.continuation ? "continuation" : "main");
    out << buf;
  }
  if (!out) throw std::runtime_error("write_loss_csv: write failed for " + path.string());
}

}  // namespace spcit::tdqr
