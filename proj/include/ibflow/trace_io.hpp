#ifndef IBFLOW_TRACE_IO_HPP
#define IBFLOW_TRACE_IO_HPP

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ibflow/error.hpp"
#include "ibflow/flownib.hpp"

namespace ibflow {

inline nlohmann::json to_json(const TraceRecord& r, std::size_t layer) {
  return nlohmann::json{{"layer", layer},
                        {"epoch", r.epoch},
                        {"alpha", r.alpha},
                        {"i_xz_raw", r.i_xz_raw},
                        {"i_zy_raw", r.i_zy_raw},
                        {"i_xz_norm", r.i_xz_norm},
                        {"i_zy_norm", r.i_zy_norm},
                        {"d_eff_z", r.d_eff_z},
                        {"d_eff_y", r.d_eff_y},
                        {"loss", r.loss}};
}

/// One JSON object per (layer, epoch) line, layers in order.
inline void write_trace_jsonl(const std::string& path,
                              const std::vector<LayerTrace>& traces) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open file for writing: " + path);
  for (const auto& trace : traces)
    for (const auto& rec : trace.records)
      out << to_json(rec, trace.layer).dump() << '\n';
  if (!out) throw Error("write failed: " + path);
}

inline std::vector<LayerTrace> read_trace_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::map<std::size_t, LayerTrace> by_layer;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("invalid trace line " + std::to_string(line_no) + " in " +
                  path + ": " + e.what());
    }
    TraceRecord r;
    try {
      r.epoch = doc.at("epoch").get<std::size_t>();
      r.alpha = doc.at("alpha").get<double>();
      r.i_xz_raw = doc.at("i_xz_raw").get<double>();
      r.i_zy_raw = doc.at("i_zy_raw").get<double>();
      r.i_xz_norm = doc.at("i_xz_norm").get<double>();
      r.i_zy_norm = doc.at("i_zy_norm").get<double>();
      r.d_eff_z = doc.at("d_eff_z").get<double>();
      r.d_eff_y = doc.at("d_eff_y").get<double>();
      r.loss = doc.at("loss").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error("trace line " + std::to_string(line_no) + " in " + path +
                  " missing field: " + e.what());
    }
    const auto layer = doc.at("layer").get<std::size_t>();
    auto& trace = by_layer[layer];
    trace.layer = layer;
    trace.records.push_back(r);
  }
  if (by_layer.empty()) throw Error("no traces");
  std::vector<LayerTrace> traces;
  for (auto& [layer, trace] : by_layer) traces.push_back(std::move(trace));
  return traces;
}

}  // namespace ibflow

#endif  // IBFLOW_TRACE_IO_HPP
