#include "metashift/param_set.hpp"

#include <json.hpp>

namespace metashift::ad {

void ParamSet::insert(const std::string& name, Tensor t) {
  if (index_.count(name)) throw std::logic_error("duplicate parameter name: " + name);
  index_[name] = names_.size();
  names_.push_back(name);
  tensors_.push_back(std::move(t));
}

void ParamSet::set(const std::string& name, Tensor t) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  tensors_[it->second] = std::move(t);
}

bool ParamSet::contains(const std::string& name) const { return index_.count(name) > 0; }

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return tensors_[it->second];
}

std::size_t ParamSet::coordinate_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

std::vector<std::string> ParamSet::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const std::string& n : names_) {
    if (n.rfind(prefix, 0) == 0) out.push_back(n);
  }
  return out;
}

ParamSet ParamSet::detached() const {
  ParamSet out;
  for (std::size_t i = 0; i < size(); ++i) out.insert(names_[i], tensors_[i].detached());
  return out;
}

bool ParamSet::all_finite() const {
  for (const Tensor& t : tensors_) {
    if (!t.all_finite()) return false;
  }
  return true;
}

bool ParamSet::same_values(const ParamSet& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!tensors_[i].same_values(other.tensors_[i])) return false;
  }
  return true;
}

double ParamSet::max_abs_diff(const ParamSet& other) const {
  if (names_ != other.names_) throw std::logic_error("max_abs_diff: mismatched parameter sets");
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    m = std::max(m, tensors_[i].max_abs_diff(other.tensors_[i]));
  }
  return m;
}

namespace {
using ordered_json = nlohmann::ordered_json;
}

std::string save_param_set(const ParamSet& p) {
  ordered_json doc = ordered_json::object();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Tensor& t = p.tensor(i);
    ordered_json entry = ordered_json::object();
    entry["shape"] = t.shape();
    entry["values"] = t.values();
    doc[p.name(i)] = std::move(entry);
  }
  return doc.dump();
}

ParamSet load_param_set(const std::string& json_text) {
  ordered_json doc = ordered_json::parse(json_text);
  if (!doc.is_object()) throw std::runtime_error("param set: expected a JSON object");
  ParamSet out;
  for (const auto& [name, entry] : doc.items()) {
    Shape shape = entry.at("shape").get<Shape>();
    std::vector<double> values = entry.at("values").get<std::vector<double>>();
    out.insert(name, Tensor(std::move(shape), std::move(values)));
  }
  return out;
}

}  // namespace metashift::ad
