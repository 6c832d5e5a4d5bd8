#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "bipinn/modular.hpp"
#include "bipinn/network.hpp"
#include "bipinn/trainer.hpp"

// JSON forms of network snapshots and module templates. Doubles survive a
// round trip bit-exactly (values are re-parsed from their shortest exact
// decimal form).

namespace bipinn {

using json = nlohmann::json;

namespace detail {

inline json grid_to_json(const Grid<double>& g) {
  json rows = json::array();
  for (int r = 0; r < g.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < g.cols; ++c) row.push_back(g.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json mask_to_json(const Grid<std::uint8_t>& g) {
  json rows = json::array();
  for (int r = 0; r < g.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < g.cols; ++c) row.push_back(static_cast<bool>(g.at(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class T, class Conv>
Grid<T> grid_from_json(const json& j, Conv conv) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j.at(0).size()) : 0;
  Grid<T> g(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j.at(r).size()) != cols)
      throw std::invalid_argument("ragged matrix in snapshot");
    for (int c = 0; c < cols; ++c) g.at(r, c) = conv(j.at(r).at(c));
  }
  return g;
}

}  // namespace detail

inline json snapshot_to_json(const GeometricNetwork& net, long epoch) {
  json j;
  j["epoch"] = epoch;
  j["layer_sizes"] = net.arch.layer_sizes;
  j["activation"] = to_string(net.arch.activation);
  j["final_activation"] = net.arch.final_activation;
  j["A"] = net.arch.geometry_scale;
  json coords = json::array();
  for (const auto& layer : net.coords) {
    json lc = json::array();
    for (const Point& p : layer) lc.push_back(json::array({p.x, p.y}));
    coords.push_back(std::move(lc));
  }
  j["coords"] = std::move(coords);
  json weights = json::array();
  for (const auto& w : net.weights) weights.push_back(detail::grid_to_json(w));
  j["weights"] = std::move(weights);
  json biases = json::array();
  for (const auto& b : net.biases) biases.push_back(b);
  j["biases"] = std::move(biases);
  json wm = json::array();
  for (const auto& m : net.weight_mask) wm.push_back(detail::mask_to_json(m));
  json bm = json::array();
  for (const auto& m : net.bias_mask) {
    json row = json::array();
    for (auto v : m) row.push_back(static_cast<bool>(v));
    bm.push_back(std::move(row));
  }
  j["mask"] = json{{"weights", std::move(wm)}, {"biases", std::move(bm)}};
  return j;
}

inline Snapshot snapshot_from_json(const json& j) {
  Snapshot snap;
  snap.epoch = j.at("epoch").get<long>();
  GeometricNetwork& net = snap.net;
  net.arch.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  net.arch.activation = activation_from_string(j.at("activation").get<std::string>());
  net.arch.final_activation = j.at("final_activation").get<bool>();
  net.arch.geometry_scale = j.at("A").get<double>();
  for (const auto& layer : j.at("coords")) {
    std::vector<Point> pts;
    for (const auto& p : layer) pts.push_back(Point{p.at(0).get<double>(), p.at(1).get<double>()});
    net.coords.push_back(std::move(pts));
  }
  for (const auto& w : j.at("weights"))
    net.weights.push_back(
        detail::grid_from_json<double>(w, [](const json& v) { return v.get<double>(); }));
  for (const auto& b : j.at("biases")) net.biases.push_back(b.get<std::vector<double>>());
  for (const auto& m : j.at("mask").at("weights"))
    net.weight_mask.push_back(detail::grid_from_json<std::uint8_t>(
        m, [](const json& v) { return static_cast<std::uint8_t>(v.get<bool>() ? 1 : 0); }));
  for (const auto& m : j.at("mask").at("biases")) {
    std::vector<std::uint8_t> row;
    for (const auto& v : m) row.push_back(v.get<bool>() ? 1 : 0);
    net.bias_mask.push_back(std::move(row));
  }
  return snap;
}

inline json template_to_json(const ModuleTemplate& t) {
  json j;
  j["layer_sizes"] = t.layer_sizes;
  j["activation"] = to_string(t.activation);
  j["final_activation"] = t.final_activation;
  json wm = json::array();
  for (const auto& m : t.weight_mask) wm.push_back(detail::mask_to_json(m));
  json bm = json::array();
  for (const auto& m : t.bias_mask) {
    json row = json::array();
    for (auto v : m) row.push_back(static_cast<bool>(v));
    bm.push_back(std::move(row));
  }
  j["mask"] = json{{"weights", std::move(wm)}, {"biases", std::move(bm)}};
  return j;
}

inline ModuleTemplate template_from_json(const json& j) {
  ModuleTemplate t;
  t.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  t.activation = activation_from_string(j.at("activation").get<std::string>());
  t.final_activation = j.at("final_activation").get<bool>();
  for (const auto& m : j.at("mask").at("weights"))
    t.weight_mask.push_back(detail::grid_from_json<std::uint8_t>(
        m, [](const json& v) { return static_cast<std::uint8_t>(v.get<bool>() ? 1 : 0); }));
  for (const auto& m : j.at("mask").at("biases")) {
    std::vector<std::uint8_t> row;
    for (const auto& v : m) row.push_back(v.get<bool>() ? 1 : 0);
    t.bias_mask.push_back(std::move(row));
  }
  return t;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace bipinn
