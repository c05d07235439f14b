#include "metashift/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace metashift {

namespace {

using nlohmann::ordered_json;

/// Object reader that rejects unknown keys and reports full field paths.
class StrictObject {
 public:
  StrictObject(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
  }
  ~StrictObject() = default;

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const ordered_json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string child_path(const std::string& key) const { return path_ + "." + key; }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(child_path(key) + ": expected a number");
    return v.get<double>();
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(child_path(key) + ": expected an integer");
    return v.get<std::int64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(child_path(key) + ": expected a boolean");
    return v.get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(child_path(key) + ": expected a string");
    return v.get<std::string>();
  }

  Interval interval(const std::string& key, Interval fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ConfigError(child_path(key) + ": expected [lo, hi]");
    }
    Interval out{v[0].get<double>(), v[1].get<double>()};
    if (!out.valid()) throw ConfigError(child_path(key) + ": lo must be <= hi");
    return out;
  }

  void check_no_unknown_keys() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError(path_ + ": unknown key '" + item.key() + "'");
      }
    }
  }

 private:
  const ordered_json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

LearnerKind parse_learner(const std::string& s, const std::string& path) {
  if (s == "maml") return LearnerKind::Maml;
  if (s == "anil") return LearnerKind::Anil;
  if (s == "ridge") return LearnerKind::Ridge;
  if (s == "proto") return LearnerKind::Proto;
  throw ConfigError(path + ": expected one of maml|anil|ridge|proto, got '" + s + "'");
}

AffineMap2D parse_transform(const ordered_json& j, const std::string& path) {
  StrictObject o(j, path);
  AffineMap2D map;
  if (o.has("linear")) {
    const auto& lin = o.raw("linear");
    if (!lin.is_array() || lin.size() != 2 || !lin[0].is_array() || lin[0].size() != 2 ||
        !lin[1].is_array() || lin[1].size() != 2) {
      throw ConfigError(path + ".linear: expected a 2x2 matrix");
    }
    map.linear = {lin[0][0].get<double>(), lin[0][1].get<double>(), lin[1][0].get<double>(),
                  lin[1][1].get<double>()};
  }
  if (o.has("offset")) {
    const auto& off = o.raw("offset");
    if (!off.is_array() || off.size() != 2) throw ConfigError(path + ".offset: expected [x, y]");
    map.offset = {off[0].get<double>(), off[1].get<double>()};
  }
  o.check_no_unknown_keys();
  if (!map.invertible()) throw ConfigError(path + ".linear: matrix is not invertible");
  return map;
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

std::string ExperimentConfig::model_tag() const {
  return std::string(learner_kind_name(learner_kind)) +
         (mode == RunMode::Fisl ? "-fisl" : "-baseline");
}

ModelSpec ExperimentConfig::model_spec() const {
  ModelSpec spec;
  spec.encoder = encoder;
  if (problem == ProblemKind::Sine) {
    spec.head.output_dim = 1;
    spec.head.kind = learner_kind == LearnerKind::Ridge ? HeadKind::RidgeClosedForm
                                                        : HeadKind::LinearRegression;
  } else {
    spec.head.output_dim = n_way;
    switch (learner_kind) {
      case LearnerKind::Proto: spec.head.kind = HeadKind::PrototypeMetric; break;
      case LearnerKind::Ridge: spec.head.kind = HeadKind::RidgeClosedForm; break;
      default: spec.head.kind = HeadKind::LinearClassifier; break;
    }
  }
  return spec;
}

TaskSampler ExperimentConfig::train_sampler() const {
  TaskSampler s;
  s.k_support = shots.k_support;
  s.k_query = shots.k_query_train;
  s.n_way = n_way;
  if (problem == ProblemKind::Sine) {
    s.kind = TaskSampler::Kind::Sine;
    s.sine = sine_source;
  } else {
    s.kind = TaskSampler::Kind::Blob;
    s.blob = blob_source;
  }
  return s;
}

TaskSampler ExperimentConfig::eval_sampler(bool unseen) const {
  TaskSampler s = train_sampler();
  s.k_query = shots.k_query_eval;
  if (problem == ProblemKind::Sine) {
    s.sine = unseen ? sine_unseen : sine_source;
  } else {
    s.blob = unseen ? blob_unseen : blob_source;
  }
  return s;
}

ExperimentConfig parse_config_text(const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }

  StrictObject root(doc, "config");
  ExperimentConfig c;

  c.learner_kind = parse_learner(root.text("learner_kind", "maml"), "config.learner_kind");
  {
    const std::string mode = root.text("mode", "fisl");
    if (mode == "fisl") c.mode = RunMode::Fisl;
    else if (mode == "baseline") c.mode = RunMode::Baseline;
    else throw ConfigError("config.mode: expected fisl|baseline, got '" + mode + "'");
  }
  {
    const std::string problem = root.text("problem", "sine");
    if (problem == "sine") c.problem = ProblemKind::Sine;
    else if (problem == "blob") c.problem = ProblemKind::Blob;
    else throw ConfigError("config.problem: expected sine|blob, got '" + problem + "'");
  }
  const bool is_blob = c.problem == ProblemKind::Blob;
  if (c.learner_kind == LearnerKind::Proto && !is_blob) {
    throw ConfigError("config.learner_kind: proto requires a classification problem");
  }

  c.seed = static_cast<std::uint64_t>(root.integer("seed", 0));
  c.iterations = root.integer("iterations", 20000);
  if (c.iterations < 0) {
    throw ConfigError("config.iterations: must be >= 0, got " + std::to_string(c.iterations));
  }
  c.outer_lr = root.number("outer_lr", 0.001);
  if (!(c.outer_lr > 0.0)) throw ConfigError("config.outer_lr: must be > 0");
  c.eval_cadence = root.integer("eval_cadence", 1000);
  if (c.eval_cadence < 1) throw ConfigError("config.eval_cadence: must be >= 1");
  c.n_eval_tasks = static_cast<std::size_t>(root.integer("n_eval_tasks", 2000));
  if (c.n_eval_tasks < 2) throw ConfigError("config.n_eval_tasks: must be >= 2");
  c.n_val_tasks = static_cast<std::size_t>(root.integer("n_val_tasks", 200));
  if (c.n_val_tasks < 2) throw ConfigError("config.n_val_tasks: must be >= 2");
  c.task_batch = static_cast<std::size_t>(root.integer("task_batch", 2));
  if (c.task_batch < 1) throw ConfigError("config.task_batch: must be >= 1");
  c.out_dir = root.text("out_dir", "runs/experiment");
  c.finite_checks = root.boolean("finite_checks", true);

  if (root.has("encoder")) {
    StrictObject enc(root.raw("encoder"), "config.encoder");
    if (enc.has("hidden_dims")) {
      const auto& dims = enc.raw("hidden_dims");
      if (!dims.is_array() || dims.empty()) {
        throw ConfigError("config.encoder.hidden_dims: expected a non-empty array");
      }
      c.encoder.hidden_dims.clear();
      for (const auto& d : dims) {
        if (!d.is_number_integer() || d.get<std::int64_t>() < 1) {
          throw ConfigError("config.encoder.hidden_dims: widths must be integers >= 1");
        }
        c.encoder.hidden_dims.push_back(d.get<std::size_t>());
      }
    }
    enc.check_no_unknown_keys();
  }
  c.encoder.input_dim = is_blob ? 2 : 1;

  {
    ordered_json empty = ordered_json::object();
    StrictObject shots(root.has("shots") ? root.raw("shots") : empty, "config.shots");
    c.shots.k_support = static_cast<std::size_t>(shots.integer("k_support", 5));
    c.shots.k_query_train =
        static_cast<std::size_t>(shots.integer("k_query_train", is_blob ? 15 : 20));
    c.shots.k_query_eval =
        static_cast<std::size_t>(shots.integer("k_query_eval", is_blob ? 15 : 100));
    shots.check_no_unknown_keys();
    if (c.shots.k_support < 1 || c.shots.k_query_train < 1 || c.shots.k_query_eval < 1) {
      throw ConfigError("config.shots: all sizes must be >= 1");
    }
  }

  {
    ordered_json empty = ordered_json::object();
    StrictObject inner(root.has("inner") ? root.raw("inner") : empty, "config.inner");
    c.inner.kind = c.learner_kind;
    const double default_lr = c.learner_kind == LearnerKind::Anil ? 0.1 : 0.01;
    const std::int64_t default_steps =
        (c.learner_kind == LearnerKind::Anil && is_blob) ? 5 : 1;
    c.inner.inner_lr = inner.number("inner_lr", default_lr);
    c.inner.inner_steps = static_cast<int>(inner.integer("inner_steps", default_steps));
    c.inner.ridge_lambda = inner.number("ridge_lambda", 1.0);
    c.inner.first_order = inner.boolean("first_order", false);
    inner.check_no_unknown_keys();
    if (c.inner.inner_lr < 0.0) throw ConfigError("config.inner.inner_lr: must be >= 0");
    if (c.inner.inner_steps < 1) throw ConfigError("config.inner.inner_steps: must be >= 1");
    if (c.inner.ridge_lambda < 0.0) throw ConfigError("config.inner.ridge_lambda: must be >= 0");
  }

  {
    ordered_json empty = ordered_json::object();
    StrictObject adv(root.has("adv") ? root.raw("adv") : empty, "config.adv");
    c.adv.penalty_gamma = adv.number("penalty_gamma", 0.5);
    c.adv.ascent_eta = adv.number("ascent_eta", is_blob ? 0.1 : 0.01);
    c.adv.ascent_steps = static_cast<int>(adv.integer("ascent_steps", 1));
    c.adv.phi_second_order = adv.boolean("phi_second_order", true);
    c.adv.freeze_phi = adv.boolean("freeze_phi", false);
    adv.check_no_unknown_keys();
    if (c.adv.penalty_gamma < 0.0) throw ConfigError("config.adv.penalty_gamma: must be >= 0");
    if (c.adv.ascent_eta < 0.0) throw ConfigError("config.adv.ascent_eta: must be >= 0");
    if (c.adv.ascent_steps < 1) throw ConfigError("config.adv.ascent_steps: must be >= 1");
  }

  {
    ordered_json empty = ordered_json::object();
    StrictObject sine(root.has("sine") ? root.raw("sine") : empty, "config.sine");
    c.sine_source.amplitude = sine.interval("source_amplitude", {0.1, 3.0});
    c.sine_source.phase = sine.interval("source_phase", {0.0, 0.75 * kPi});
    c.sine_unseen.amplitude = sine.interval("unseen_amplitude", {3.0, 5.0});
    c.sine_unseen.phase = sine.interval("unseen_phase", {0.75 * kPi, kPi});
    const Interval xr = sine.interval("x_range", {-5.0, 5.0});
    sine.check_no_unknown_keys();
    c.sine_source.x_range = xr;
    c.sine_unseen.x_range = xr;
    c.sine_source.tag = "source";
    c.sine_unseen.tag = "unseen";
  }

  {
    ordered_json empty = ordered_json::object();
    StrictObject blob(root.has("blob") ? root.raw("blob") : empty, "config.blob");
    c.n_way = static_cast<std::size_t>(blob.integer("n_way", 5));
    c.blob_source.n_classes_pool = static_cast<std::size_t>(blob.integer("n_classes_pool", 20));
    c.blob_source.center_norm = blob.interval("center_norm", {2.0, 6.0});
    c.blob_source.noise_std = blob.number("noise_std", 1.0);
    c.blob_source.center_seed = static_cast<std::uint64_t>(blob.integer("center_seed", 1234));
    AffineMap2D unseen_map = AffineMap2D::rotation_scale_translate(45.0, 1.5, 1.0, -1.0);
    if (blob.has("unseen_transform")) {
      unseen_map = parse_transform(blob.raw("unseen_transform"), "config.blob.unseen_transform");
    }
    blob.check_no_unknown_keys();
    if (c.n_way < 2) throw ConfigError("config.blob.n_way: must be >= 2");
    if (c.n_way > c.blob_source.n_classes_pool) {
      throw ConfigError("config.blob.n_way: exceeds n_classes_pool");
    }
    if (c.blob_source.noise_std < 0.0) throw ConfigError("config.blob.noise_std: must be >= 0");
    c.blob_source.tag = "source";
    c.blob_unseen = c.blob_source;
    c.blob_unseen.transform = unseen_map;
    c.blob_unseen.tag = "unseen";
  }

  root.check_no_unknown_keys();
  return c;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string resolved_config_json(const ExperimentConfig& c) {
  ordered_json doc;
  doc["learner_kind"] = learner_kind_name(c.learner_kind);
  doc["mode"] = c.mode == RunMode::Fisl ? "fisl" : "baseline";
  doc["problem"] = c.problem == ProblemKind::Sine ? "sine" : "blob";
  doc["seed"] = c.seed;
  doc["iterations"] = c.iterations;
  doc["outer_lr"] = c.outer_lr;
  doc["eval_cadence"] = c.eval_cadence;
  doc["n_eval_tasks"] = c.n_eval_tasks;
  doc["n_val_tasks"] = c.n_val_tasks;
  doc["task_batch"] = c.task_batch;
  doc["out_dir"] = c.out_dir;
  doc["finite_checks"] = c.finite_checks;
  doc["encoder"] = {{"hidden_dims", c.encoder.hidden_dims}};
  doc["shots"] = {{"k_support", c.shots.k_support},
                  {"k_query_train", c.shots.k_query_train},
                  {"k_query_eval", c.shots.k_query_eval}};
  doc["inner"] = {{"inner_lr", c.inner.inner_lr},
                  {"inner_steps", c.inner.inner_steps},
                  {"ridge_lambda", c.inner.ridge_lambda},
                  {"first_order", c.inner.first_order}};
  doc["adv"] = {{"penalty_gamma", c.adv.penalty_gamma},
                {"ascent_eta", c.adv.ascent_eta},
                {"ascent_steps", c.adv.ascent_steps},
                {"phi_second_order", c.adv.phi_second_order},
                {"freeze_phi", c.adv.freeze_phi}};
  doc["sine"] = {{"source_amplitude", {c.sine_source.amplitude.lo, c.sine_source.amplitude.hi}},
                 {"source_phase", {c.sine_source.phase.lo, c.sine_source.phase.hi}},
                 {"unseen_amplitude", {c.sine_unseen.amplitude.lo, c.sine_unseen.amplitude.hi}},
                 {"unseen_phase", {c.sine_unseen.phase.lo, c.sine_unseen.phase.hi}},
                 {"x_range", {c.sine_source.x_range.lo, c.sine_source.x_range.hi}}};
  doc["blob"] = {
      {"n_way", c.n_way},
      {"n_classes_pool", c.blob_source.n_classes_pool},
      {"center_norm", {c.blob_source.center_norm.lo, c.blob_source.center_norm.hi}},
      {"noise_std", c.blob_source.noise_std},
      {"center_seed", c.blob_source.center_seed},
      {"unseen_transform",
       {{"linear",
         {{c.blob_unseen.transform.linear[0], c.blob_unseen.transform.linear[1]},
          {c.blob_unseen.transform.linear[2], c.blob_unseen.transform.linear[3]}}},
        {"offset", {c.blob_unseen.transform.offset[0], c.blob_unseen.transform.offset[1]}}}}};
  return doc.dump(2);
}

}  // namespace metashift
