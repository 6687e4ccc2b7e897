#include "metadapt/config.hpp"

#include <fstream>
#include <set>

#include "metadapt/errors.hpp"

namespace metadapt {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid value for '" + key + "'");
  }
}

SynthConfig synth_from_json(const json& obj) {
  check_keys(obj,
             {"n_dates", "n_instruments", "feature_dim", "noise_std", "drift_mode", "drift_rate",
              "switch_period", "signal_norm", "covariate_drift"},
             "data.synth");
  SynthConfig synth;
  synth.n_dates = get_or<std::size_t>(obj, "n_dates", synth.n_dates);
  synth.n_instruments = get_or<std::size_t>(obj, "n_instruments", synth.n_instruments);
  synth.feature_dim = get_or<std::size_t>(obj, "feature_dim", synth.feature_dim);
  synth.noise_std = get_or<double>(obj, "noise_std", synth.noise_std);
  synth.drift_mode = parse_drift_mode(get_or<std::string>(obj, "drift_mode", "stationary"));
  synth.drift_rate = get_or<double>(obj, "drift_rate", synth.drift_rate);
  synth.switch_period = get_or<std::size_t>(obj, "switch_period", synth.switch_period);
  synth.signal_norm = get_or<double>(obj, "signal_norm", synth.signal_norm);
  synth.covariate_drift = get_or<double>(obj, "covariate_drift", synth.covariate_drift);
  return synth;
}

}  // namespace

AppConfig default_config() {
  AppConfig config;
  config.data.synth = SynthConfig{};
  config.schedule.train_end = "239";
  config.schedule.valid_end = "319";
  return config;
}

AppConfig config_from_json(const json& doc) {
  check_keys(doc, {"data", "schedule", "model", "adapter", "meta", "training", "output"}, "config");
  AppConfig config = default_config();

  if (doc.contains("data")) {
    const json& data = doc.at("data");
    check_keys(data, {"csv", "schema", "synth"}, "data");
    if (data.contains("csv") && data.contains("synth")) {
      throw ConfigError("data: specify either 'csv' or 'synth', not both");
    }
    if (data.contains("csv")) {
      config.data.synth.reset();
      config.data.csv_path = data.at("csv").get<std::string>();
      std::string schema = get_or<std::string>(data, "schema", "features");
      if (schema == "features") {
        config.data.csv_schema = CsvSchema::Features;
      } else if (schema == "price") {
        config.data.csv_schema = CsvSchema::Price;
      } else {
        throw ConfigError("data.schema must be 'features' or 'price'");
      }
    } else if (data.contains("synth")) {
      config.data.synth = synth_from_json(data.at("synth"));
    }
  }

  if (doc.contains("schedule")) {
    const json& schedule = doc.at("schedule");
    check_keys(schedule, {"interval", "train_end", "valid_end"}, "schedule");
    config.pipeline.interval = get_or<std::size_t>(schedule, "interval", config.pipeline.interval);
    if (schedule.contains("train_end")) {
      config.schedule.train_end = schedule.at("train_end").is_string()
                                      ? schedule.at("train_end").get<std::string>()
                                      : std::to_string(schedule.at("train_end").get<std::int64_t>());
    }
    if (schedule.contains("valid_end")) {
      config.schedule.valid_end = schedule.at("valid_end").is_string()
                                      ? schedule.at("valid_end").get<std::string>()
                                      : std::to_string(schedule.at("valid_end").get<std::int64_t>());
    }
  }

  if (doc.contains("model")) {
    const json& model = doc.at("model");
    check_keys(model, {"backbone", "hidden"}, "model");
    config.pipeline.backbone = get_or<std::string>(model, "backbone", config.pipeline.backbone);
    if (model.contains("hidden")) {
      config.pipeline.hidden_sizes = model.at("hidden").get<std::vector<std::size_t>>();
    }
  }

  if (doc.contains("adapter")) {
    const json& adapter = doc.at("adapter");
    check_keys(adapter,
               {"heads", "temperature", "gamma_min", "label_gate", "layout", "step_dim",
                "label_gate_dim"},
               "adapter");
    auto& a = config.pipeline.adapter;
    a.head_count = get_or<std::size_t>(adapter, "heads", a.head_count);
    a.temperature = get_or<double>(adapter, "temperature", a.temperature);
    a.gamma_min = get_or<double>(adapter, "gamma_min", a.gamma_min);
    std::string gate = get_or<std::string>(adapter, "label_gate", "separate");
    if (gate == "separate") {
      a.label_gate = LabelGateMode::Separate;
    } else if (gate == "shared") {
      a.label_gate = LabelGateMode::Shared;
    } else {
      throw ConfigError("adapter.label_gate must be 'separate' or 'shared'");
    }
    std::string layout = get_or<std::string>(adapter, "layout", "flat");
    if (layout == "flat") {
      a.layout = FeatureLayout::Flat;
    } else if (layout == "timeseries") {
      a.layout = FeatureLayout::Timeseries;
    } else {
      throw ConfigError("adapter.layout must be 'flat' or 'timeseries'");
    }
    a.step_dim = get_or<std::size_t>(adapter, "step_dim", a.step_dim);
    a.label_gate_dim = get_or<std::size_t>(adapter, "label_gate_dim", a.label_gate_dim);
  }

  if (doc.contains("meta")) {
    const json& meta = doc.at("meta");
    check_keys(meta, {"alpha", "eta_theta", "eta_phi", "eta_psi", "reg_mode", "sigma"}, "meta");
    auto& m = config.pipeline.meta;
    m.alpha = get_or<double>(meta, "alpha", m.alpha);
    config.pipeline.eta_theta = get_or<double>(meta, "eta_theta", config.pipeline.eta_theta);
    m.eta_phi = get_or<double>(meta, "eta_phi", m.eta_phi);
    m.eta_psi = get_or<double>(meta, "eta_psi", m.eta_psi);
    std::string mode = get_or<std::string>(meta, "reg_mode", "fixed");
    if (mode == "fixed") {
      m.reg_mode = RegMode::Fixed;
    } else if (mode == "adaptive") {
      m.reg_mode = RegMode::Adaptive;
    } else {
      throw ConfigError("meta.reg_mode must be 'fixed' or 'adaptive'");
    }
    m.sigma = get_or<double>(meta, "sigma", m.sigma);
    if (m.sigma <= 0.0) throw ConfigError("meta.sigma must be positive");
    if (m.alpha < 0.0 || config.pipeline.eta_theta < 0.0 || m.eta_phi < 0.0 || m.eta_psi < 0.0) {
      throw ConfigError("meta rates and alpha must be >= 0");
    }
  }

  if (doc.contains("training")) {
    const json& training = doc.at("training");
    check_keys(training,
               {"seed", "mode", "patience", "max_epochs", "pretrain_epochs", "pretrain_lr",
                "inner_steps", "rr_epochs"},
               "training");
    auto& p = config.pipeline;
    p.seed = get_or<std::uint64_t>(training, "seed", p.seed);
    p.mode = parse_run_mode(get_or<std::string>(training, "mode", "doubleadapt"));
    p.patience = get_or<int>(training, "patience", p.patience);
    p.max_epochs = get_or<int>(training, "max_epochs", p.max_epochs);
    p.pretrain_epochs = get_or<int>(training, "pretrain_epochs", p.pretrain_epochs);
    p.pretrain_lr = get_or<double>(training, "pretrain_lr", p.pretrain_lr);
    p.inner_steps = get_or<int>(training, "inner_steps", p.inner_steps);
    p.rr_epochs = get_or<int>(training, "rr_epochs", p.rr_epochs);
    if (p.patience < 1) throw ConfigError("training.patience must be >= 1");
    if (p.inner_steps < 1) throw ConfigError("training.inner_steps must be >= 1");
    if (p.rr_epochs < 0) throw ConfigError("training.rr_epochs must be >= 0");
  }

  if (doc.contains("output")) {
    const json& output = doc.at("output");
    check_keys(output, {"dir"}, "output");
    config.output_dir = get_or<std::string>(output, "dir", config.output_dir);
  }
  return config;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config '" + path + "': " + e.what());
  }
  return config_from_json(doc);
}

nlohmann::json config_to_json(const AppConfig& config) {
  json doc;
  if (config.data.synth) {
    const SynthConfig& s = *config.data.synth;
    doc["data"]["synth"] = {{"n_dates", s.n_dates},
                            {"n_instruments", s.n_instruments},
                            {"feature_dim", s.feature_dim},
                            {"noise_std", s.noise_std},
                            {"drift_mode", drift_mode_name(s.drift_mode)},
                            {"drift_rate", s.drift_rate},
                            {"switch_period", s.switch_period},
                            {"signal_norm", s.signal_norm},
                            {"covariate_drift", s.covariate_drift}};
  } else {
    doc["data"]["csv"] = config.data.csv_path.value_or("");
    doc["data"]["schema"] = config.data.csv_schema == CsvSchema::Features ? "features" : "price";
  }
  doc["schedule"] = {{"interval", config.pipeline.interval},
                     {"train_end", config.schedule.train_end},
                     {"valid_end", config.schedule.valid_end}};
  doc["model"] = {{"backbone", config.pipeline.backbone},
                  {"hidden", config.pipeline.hidden_sizes}};
  const auto& a = config.pipeline.adapter;
  doc["adapter"] = {{"heads", a.head_count},
                    {"temperature", a.temperature},
                    {"gamma_min", a.gamma_min},
                    {"label_gate", a.label_gate == LabelGateMode::Separate ? "separate" : "shared"},
                    {"layout", a.layout == FeatureLayout::Flat ? "flat" : "timeseries"},
                    {"step_dim", a.step_dim},
                    {"label_gate_dim", a.label_gate_dim}};
  const auto& m = config.pipeline.meta;
  doc["meta"] = {{"alpha", m.alpha},
                 {"eta_theta", config.pipeline.eta_theta},
                 {"eta_phi", m.eta_phi},
                 {"eta_psi", m.eta_psi},
                 {"reg_mode", m.reg_mode == RegMode::Fixed ? "fixed" : "adaptive"},
                 {"sigma", m.sigma}};
  doc["training"] = {{"seed", config.pipeline.seed},
                     {"mode", run_mode_name(config.pipeline.mode)},
                     {"patience", config.pipeline.patience},
                     {"max_epochs", config.pipeline.max_epochs},
                     {"pretrain_epochs", config.pipeline.pretrain_epochs},
                     {"pretrain_lr", config.pipeline.pretrain_lr},
                     {"inner_steps", config.pipeline.inner_steps},
                     {"rr_epochs", config.pipeline.rr_epochs}};
  doc["output"] = {{"dir", config.output_dir}};
  return doc;
}

}  // namespace metadapt
