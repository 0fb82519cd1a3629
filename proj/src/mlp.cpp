/*
Copyright 2026 The roomsound Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/


#include "roomsound/mlp.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

namespace roomsound {

namespace {

struct TableRow {
  int layers;
  int units;
  int batch;
  int epochs;
};

const std::map<std::string, TableRow>& architecture_table() {
  static const std::map<std::string, TableRow> table = {
      {"125", {7, 100, 128, 100}},  {"250", {7, 100, 128, 100}},  {"500", {5, 150, 128, 100}},
      {"1000", {9, 150, 128, 150}}, {"2000", {5, 150, 128, 150}}, {"4000", {5, 100, 128, 100}},
      {"sti", {5, 50, 64, 50}},
  };
  return table;
}

double standard_normal(Rng& rng) {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

// Activations kept for backpropagation. inputs[l] feeds layer l; masks are
// empty in inference mode.
struct Trace {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> masks;
  Eigen::MatrixXd logits;
};

void run_forward(const MlpModel& model, const Eigen::MatrixXd& x, Rng* dropout_rng, Trace* trace,
                 Eigen::MatrixXd& logits) {
  if (x.cols() != model.spec.input_dim) {
    throw std::invalid_argument("input has " + std::to_string(x.cols()) + " columns, model expects " +
                                std::to_string(model.spec.input_dim));
  }
  const std::size_t n_layers = model.layer_count();
  const double p = model.spec.dropout;
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    Eigen::MatrixXd z = a * model.weights[l];
    z.rowwise() += model.biases[l];
    if (trace) {
      trace->inputs.push_back(a);
      trace->pre.push_back(z);
    }
    a = z.cwiseMax(0.0);
    if (dropout_rng && p > 0.0) {
      // Layers without dropout get an all-ones mask so backprop can index masks by layer.
      Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(a.rows(), a.cols());
      if (model.spec.dropout_all_layers || l + 2 == n_layers) {
        const double keep_scale = 1.0 / (1.0 - p);
        for (Eigen::Index j = 0; j < mask.cols(); ++j) {
          for (Eigen::Index i = 0; i < mask.rows(); ++i) mask(i, j) = dropout_rng->uniform() < p ? 0.0 : keep_scale;
        }
        a.array() *= mask.array();
      }
      if (trace) trace->masks.push_back(std::move(mask));
    }
  }
  logits = a * model.weights.back();
  logits.rowwise() += model.biases.back();
  if (trace) trace->inputs.push_back(std::move(a));
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& doc, Eigen::Index rows, Eigen::Index cols,
                                 const std::string& what) {
  if (!doc.is_array() || static_cast<Eigen::Index>(doc.size()) != rows) {
    throw ModelFormatError(what + ": expected " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = doc[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ModelFormatError(what + ": row " + std::to_string(i) + " should have " + std::to_string(cols) + " values");
    }
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

}  // namespace

void MlpSpec::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("invalid network spec: " + msg); };
  if (input_dim < 1 || output_dim < 1) fail("input and output sizes must be positive");
  if (hidden_layers < 1 || hidden_units < 1) fail("need at least one hidden layer with one unit");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (batch_size < 1) fail("batch_size must be positive");
  if (epochs < 1) fail("epochs must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail("Adam betas must be in [0, 1)");
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
}

nlohmann::json to_json(const MlpSpec& s) {
  return {{"input_dim", s.input_dim},   {"hidden_layers", s.hidden_layers},
          {"hidden_units", s.hidden_units}, {"output_dim", s.output_dim},
          {"dropout", s.dropout},       {"dropout_all_layers", s.dropout_all_layers},
          {"batch_size", s.batch_size},
          {"epochs", s.epochs},         {"learning_rate", s.learning_rate},
          {"beta1", s.beta1},           {"beta2", s.beta2},
          {"epsilon", s.epsilon},       {"seed", s.seed}};
}

MlpSpec mlp_spec_from_json(const nlohmann::json& doc) {
  MlpSpec s;
  s.input_dim = doc.at("input_dim").get<int>();
  s.hidden_layers = doc.at("hidden_layers").get<int>();
  s.hidden_units = doc.at("hidden_units").get<int>();
  s.output_dim = doc.at("output_dim").get<int>();
  s.dropout = doc.at("dropout").get<double>();
  s.dropout_all_layers = doc.at("dropout_all_layers").get<bool>();
  s.batch_size = doc.at("batch_size").get<int>();
  s.epochs = doc.at("epochs").get<int>();
  s.learning_rate = doc.at("learning_rate").get<double>();
  s.beta1 = doc.at("beta1").get<double>();
  s.beta2 = doc.at("beta2").get<double>();
  s.epsilon = doc.at("epsilon").get<double>();
  s.seed = doc.at("seed").get<std::uint64_t>();
  s.validate();
  return s;
}

MlpSpec default_spec(const std::string& model_id) {
  const auto& table = architecture_table();
  auto it = table.find(model_id);
  if (it == table.end()) throw std::invalid_argument("unknown model '" + model_id + "'");
  MlpSpec s;
  const auto band = model_band(model_id);
  s.input_dim = static_cast<int>(band ? kBandFeatureCount : kStiFeatureCount);
  s.output_dim = band ? 4 : 1;
  s.hidden_layers = it->second.layers;
  s.hidden_units = it->second.units;
  s.batch_size = it->second.batch;
  s.epochs = it->second.epochs;
  return s;
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"names", r.names}, {"mse", r.mse}, {"mae", r.mae}, {"r2", r.r2}};
}

EvalReport eval_report_from_json(const nlohmann::json& doc) {
  EvalReport r;
  r.names = doc.at("names").get<std::vector<std::string>>();
  r.mse = doc.at("mse").get<std::vector<double>>();
  r.mae = doc.at("mae").get<std::vector<double>>();
  r.r2 = doc.at("r2").get<std::vector<double>>();
  return r;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

MlpModel zero_model(const MlpSpec& spec) {
  spec.validate();
  MlpModel m;
  m.spec = spec;
  int fan_in = spec.input_dim;
  for (int l = 0; l <= spec.hidden_layers; ++l) {
    const int fan_out = l == spec.hidden_layers ? spec.output_dim : spec.hidden_units;
    m.weights.push_back(Eigen::MatrixXd::Zero(fan_in, fan_out));
    m.biases.push_back(Eigen::RowVectorXd::Zero(fan_out));
    fan_in = fan_out;
  }
  m.feature_scaling.min.assign(static_cast<std::size_t>(spec.input_dim), 0.0);
  m.feature_scaling.max.assign(static_cast<std::size_t>(spec.input_dim), 1.0);
  m.target_scaling.min.assign(static_cast<std::size_t>(spec.output_dim), 0.0);
  m.target_scaling.max.assign(static_cast<std::size_t>(spec.output_dim), 1.0);
  return m;
}

MlpModel init_model(const MlpSpec& spec) {
  MlpModel m = zero_model(spec);
  Rng rng(mix_seed(spec.seed, 0x1417));
  for (auto& w : m.weights) {
    const double sd = std::sqrt(2.0 / static_cast<double>(w.rows()));
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = sd * standard_normal(rng);
    }
  }
  return m;
}

MlpModel make_model(const std::string& model_id, const MlpSpec& spec, const Dataset& dataset) {
  const auto band = model_band(model_id);
  if (static_cast<std::size_t>(spec.input_dim) != (band ? kBandFeatureCount : kStiFeatureCount) ||
      static_cast<std::size_t>(spec.output_dim) != model_target_indices(model_id).size()) {
    throw std::invalid_argument("spec sizes do not match model '" + model_id + "'");
  }
  if (dataset.split.empty() || dataset.count(Split::kTrain) == 0) {
    throw std::invalid_argument("dataset has no training rows; split it first");
  }
  MlpModel m = init_model(spec);
  m.model_id = model_id;
  m.feature_names = feature_names(band);
  m.target_names = model_target_names(model_id);
  m.feature_scaling = MinMaxScaling::fit(model_view(dataset, model_id, Split::kTrain).x);
  const auto targets = model_target_indices(model_id);
  m.target_scaling = dataset.scaling.subset(targets);
  return m;
}

Eigen::MatrixXd forward_logits(const MlpModel& model, const Eigen::MatrixXd& x, Rng* dropout_rng) {
  Eigen::MatrixXd logits;
  run_forward(model, x, dropout_rng, nullptr, logits);
  return logits;
}

Eigen::MatrixXd forward(const MlpModel& model, const Eigen::MatrixXd& x, Rng* dropout_rng) {
  return sigmoid(forward_logits(model, x, dropout_rng));
}

double mse_loss(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Gradients* grad,
                Rng* dropout_rng) {
  if (y.rows() != x.rows() || y.cols() != model.spec.output_dim) throw std::invalid_argument("target shape mismatch");
  Trace trace;
  Eigen::MatrixXd logits;
  run_forward(model, x, dropout_rng, grad ? &trace : nullptr, logits);
  const Eigen::MatrixXd out = sigmoid(logits);
  const Eigen::MatrixXd diff = out - y;
  const double count = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / count;
  if (!grad) return loss;

  const std::size_t n_layers = model.layer_count();
  grad->weights.resize(n_layers);
  grad->biases.resize(n_layers);
  Eigen::MatrixXd delta = ((2.0 / count) * diff.array() * out.array() * (1.0 - out.array())).matrix();
  for (std::size_t l = n_layers; l-- > 0;) {
    grad->weights[l].noalias() = trace.inputs[l].transpose() * delta;
    grad->biases[l] = delta.colwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = delta * model.weights[l].transpose();
    if (!trace.masks.empty()) back.array() *= trace.masks[l - 1].array();
    delta = (trace.pre[l - 1].array() > 0.0).select(back, 0.0);
  }
  return loss;
}

void train(MlpModel& model, const ModelData& train_rows, const ModelData* test_rows, const EpochCallback& on_epoch) {
  const MlpSpec& spec = model.spec;
  spec.validate();
  if (train_rows.x.rows() == 0) throw std::invalid_argument("no training rows");
  if (train_rows.x.cols() != spec.input_dim || train_rows.y.cols() != spec.output_dim) {
    throw std::invalid_argument("training data shape does not match the network");
  }
  const Eigen::MatrixXd x = model.feature_scaling.normalize(train_rows.x);
  const Eigen::MatrixXd y = model.target_scaling.normalize(train_rows.y);
  Eigen::MatrixXd x_test, y_test;
  if (test_rows && test_rows->x.rows() > 0) {
    x_test = model.feature_scaling.normalize(test_rows->x);
    y_test = model.target_scaling.normalize(test_rows->y);
  }

  const std::size_t n_layers = model.layer_count();
  Gradients m1, m2, grad;
  for (std::size_t l = 0; l < n_layers; ++l) {
    m1.weights.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
    m1.biases.push_back(Eigen::RowVectorXd::Zero(model.biases[l].size()));
  }
  m2 = m1;

  Rng rng(mix_seed(spec.seed, 0x7a11));
  const auto n = static_cast<std::size_t>(x.rows());
  const auto batch = static_cast<std::size_t>(spec.batch_size);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::uint64_t step = 0;
  model.history = {};

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      const Eigen::MatrixXd xb = x(rows, Eigen::all);
      const Eigen::MatrixXd yb = y(rows, Eigen::all);
      const double loss = mse_loss(model, xb, yb, &grad, &rng);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "training diverged: loss is " << loss << " at epoch " << epoch + 1 << ", batch starting at row "
            << start << "; lower the learning rate (currently " << spec.learning_rate << ")";
        throw TrainingDiverged(msg.str());
      }
      ++step;
      const double c1 = 1.0 - std::pow(spec.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(spec.beta2, static_cast<double>(step));
      auto update = [&](auto& param, auto& g, auto& m, auto& v) {
        m = spec.beta1 * m + (1.0 - spec.beta1) * g;
        v = spec.beta2 * v + (1.0 - spec.beta2) * g.cwiseProduct(g);
        param.array() -= spec.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + spec.epsilon);
      };
      for (std::size_t l = 0; l < n_layers; ++l) {
        update(model.weights[l], grad.weights[l], m1.weights[l], m2.weights[l]);
        update(model.biases[l], grad.biases[l], m1.biases[l], m2.biases[l]);
      }
    }
    const double train_mse = mse_loss(model, x, y);
    const double test_mse = x_test.rows() > 0 ? mse_loss(model, x_test, y_test) : std::nan("");
    model.history.train_mse.push_back(train_mse);
    if (x_test.rows() > 0) model.history.test_mse.push_back(test_mse);
    if (on_epoch) on_epoch(epoch + 1, train_mse, test_mse);
  }
  if (test_rows && test_rows->x.rows() > 0) model.test_report = evaluate(model, *test_rows);
}

Eigen::MatrixXd predict_unit(const MlpModel& model, const Eigen::MatrixXd& x_raw) {
  return forward(model, model.feature_scaling.normalize(x_raw));
}

Eigen::MatrixXd predict(const MlpModel& model, const Eigen::MatrixXd& x_raw) {
  return model.target_scaling.denormalize(predict_unit(model, x_raw));
}

EvalReport score(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& truth, std::vector<std::string> names) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw std::invalid_argument("prediction and truth shapes differ");
  }
  if (truth.rows() == 0) throw std::invalid_argument("no rows to score");
  EvalReport r;
  r.names = std::move(names);
  r.names.resize(static_cast<std::size_t>(truth.cols()));
  const double n = static_cast<double>(truth.rows());
  for (Eigen::Index j = 0; j < truth.cols(); ++j) {
    const Eigen::ArrayXd err = predicted.col(j).array() - truth.col(j).array();
    const double ss_res = err.square().sum();
    const double mean = truth.col(j).mean();
    const double ss_tot = (truth.col(j).array() - mean).square().sum();
    r.mse.push_back(ss_res / n);
    r.mae.push_back(err.abs().sum() / n);
    r.r2.push_back(ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0));
  }
  return r;
}

EvalReport evaluate(const MlpModel& model, const ModelData& rows) {
  return score(predict(model, rows.x), rows.y, model.target_names);
}

nlohmann::json to_json(const MlpModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    layers.push_back({{"weights", matrix_json(model.weights[l])},
                      {"bias", std::vector<double>(model.biases[l].data(),
                                                   model.biases[l].data() + model.biases[l].size())}});
  }
  nlohmann::json doc = {{"format", "roomsound-mlp"},
                        {"version", kModelFormatVersion},
                        {"model_id", model.model_id},
                        {"spec", to_json(model.spec)},
                        {"feature_names", model.feature_names},
                        {"target_names", model.target_names},
                        {"feature_scaling", to_json(model.feature_scaling)},
                        {"target_scaling", to_json(model.target_scaling)},
                        {"history", {{"train_mse", model.history.train_mse}, {"test_mse", model.history.test_mse}}},
                        {"layers", layers}};
  if (model.test_report) doc["test_report"] = to_json(*model.test_report);
  return doc;
}

MlpModel model_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object() || doc.value("format", "") != "roomsound-mlp") {
      throw ModelFormatError("not a roomsound model document");
    }
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw ModelFormatError("unsupported model format version " + std::to_string(version) + " (this build reads " +
                             std::to_string(kModelFormatVersion) + ")");
    }
    MlpModel m = zero_model(mlp_spec_from_json(doc.at("spec")));
    m.model_id = doc.at("model_id").get<std::string>();
    m.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    m.target_names = doc.at("target_names").get<std::vector<std::string>>();
    m.feature_scaling = min_max_scaling_from_json(doc.at("feature_scaling"));
    m.target_scaling = min_max_scaling_from_json(doc.at("target_scaling"));
    if (m.feature_scaling.size() != static_cast<std::size_t>(m.spec.input_dim) ||
        m.target_scaling.size() != static_cast<std::size_t>(m.spec.output_dim)) {
      throw ModelFormatError("scaling sizes do not match the network");
    }
    m.history.train_mse = doc.at("history").at("train_mse").get<std::vector<double>>();
    m.history.test_mse = doc.at("history").at("test_mse").get<std::vector<double>>();
    const auto& layers = doc.at("layers");
    if (layers.size() != m.layer_count()) throw ModelFormatError("layer count does not match the network description");
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
      const std::string what = "layer " + std::to_string(l);
      m.weights[l] =
          matrix_from_json(layers[l].at("weights"), m.weights[l].rows(), m.weights[l].cols(), what + " weights");
      const auto bias = layers[l].at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(bias.size()) != m.biases[l].size()) throw ModelFormatError(what + ": bias size");
      for (std::size_t j = 0; j < bias.size(); ++j) m.biases[l](static_cast<Eigen::Index>(j)) = bias[j];
    }
    if (doc.contains("test_report")) m.test_report = eval_report_from_json(doc.at("test_report"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("malformed model document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelFormatError(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << to_json(model).dump() << '\n';
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read model file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelFormatError(path.string() + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what(), e.byte);
  }
  try {
    return model_from_json(doc);
  } catch (const ModelFormatError& e) {
    throw ModelFormatError(path.string() + ": " + e.what());
  }
}

}  // namespace roomsound
