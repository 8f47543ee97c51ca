#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "signopt/errors.hpp"
#include "signopt/oracle.hpp"

namespace signopt {

inline constexpr std::string_view kModelFormat = "smlp-v1";

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline double parse_real(std::string_view field, const std::string& where) {
  field = trim(field);
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end)
    throw ParseError(where + ": not a number: '" + std::string(field) + "'");
  return v;
}

inline std::size_t parse_index(std::string_view field, const std::string& where) {
  field = trim(field);
  std::size_t v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end)
    throw ParseError(where + ": not a non-negative integer label: '" + std::string(field) + "'");
  return v;
}

inline std::vector<double> reals(const nlohmann::json& j, const char* key, std::size_t layer) {
  const auto where = "layer " + std::to_string(layer) + " field '" + key + "'";
  if (!j.contains(key) || !j.at(key).is_array()) throw ParseError(where + " missing or not an array");
  std::vector<double> out;
  out.reserve(j.at(key).size());
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) throw ParseError(where + " contains a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::size_t count_field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number_unsigned())
    throw ParseError(where + " field '" + key + "' missing or not a non-negative integer");
  return j.at(key).get<std::size_t>();
}

}  // namespace detail

/// Parses an SMLP-v1 document.
inline MlpModel parse_model(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model file is not valid: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("model file must hold a single object");
  if (!doc.contains("format") || doc.at("format") != kModelFormat)
    throw ParseError("model format must be \"smlp-v1\"");
  const auto classes = detail::count_field(doc, "num_classes", "model");
  if (!doc.contains("layers") || !doc.at("layers").is_array())
    throw ParseError("model field 'layers' missing or not an array");

  std::vector<Layer> layers;
  std::size_t i = 0;
  for (const auto& l : doc.at("layers")) {
    const auto where = "layer " + std::to_string(i);
    if (!l.is_object() || !l.contains("type") || !l.at("type").is_string())
      throw ParseError(where + " has no type tag");
    const auto type = l.at("type").get<std::string>();
    if (type == "dense") {
      DenseLayer d;
      d.rows = detail::count_field(l, "rows", where);
      d.cols = detail::count_field(l, "cols", where);
      d.weights = detail::reals(l, "weights", i);
      d.bias = detail::reals(l, "bias", i);
      layers.emplace_back(std::move(d));
    } else if (type == "relu") {
      layers.emplace_back(ReluLayer{});
    } else {
      throw ParseError(where + " has unknown type '" + type + "'");
    }
    ++i;
  }
  return MlpModel(std::move(layers), classes);
}

inline MlpModel load_model(const std::string& path) { return parse_model(detail::read_file(path)); }

inline std::string dump_model(const MlpModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : model.layers()) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      layers.push_back({{"type", "dense"},
                        {"rows", d->rows},
                        {"cols", d->cols},
                        {"weights", d->weights},
                        {"bias", d->bias}});
    } else {
      layers.push_back({{"type", "relu"}});
    }
  }
  nlohmann::json doc = {{"format", kModelFormat}, {"num_classes", model.num_classes()}, {"layers", layers}};
  return doc.dump() + "\n";
}

inline void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << dump_model(model);
  if (!out) throw Error("failed writing " + path);
}

/// Header-less CSV, one `label,f1,...,fd` row per example.
inline std::vector<Example> parse_dataset(std::string_view text, const std::string& name = "dataset") {
  std::vector<Example> out;
  std::size_t width = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;

    const auto where = name + ":" + std::to_string(line_no);
    std::vector<std::string_view> fields;
    for (std::size_t start = 0;;) {
      const auto comma = line.find(',', start);
      fields.push_back(
          line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 2) throw ParseError(where + ": need a label and at least one feature");
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw ParseError(where + ": row has " + std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(width));

    Example ex;
    ex.y = Label{detail::parse_index(fields[0], where)};
    ex.x.reserve(width - 1);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const double v = detail::parse_real(fields[k], where);
      if (!std::isfinite(v)) throw ParseError(where + ": non-finite feature");
      ex.x.push_back(v);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<Example> load_dataset(const std::string& path) {
  return parse_dataset(detail::read_file(path), path);
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void save_dataset(const std::vector<Example>& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (const auto& ex : data) {
    out << ex.y.value;
    for (double v : ex.x) out << ',' << format_real(v);
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

}  // namespace signopt
