#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "muse/core.hpp"

namespace muse {

/// Parses the canonical record format, one record per (sample, dimension):
///   <sample_id>,<dim_id>,<label>,<v1>,<v2>,...,<vk>
/// '#'-prefixed lines are comments. Records of one sample must agree on label
/// and value count, and cover dim_ids 0..m-1 exactly. Samples appear in the
/// dataset in first-appearance order of their sample_id.
inline Dataset load_dataset(std::istream& in, const std::string& source_name = "<stream>") {
  struct PendingSample {
    std::string label;
    std::vector<Series> dims_by_id;  // index = dim_id; empty Series = missing
    std::vector<bool> seen;
    std::size_t value_count = 0;
  };

  std::unordered_map<std::string, std::size_t> index_of;
  std::vector<std::string> order;
  std::vector<PendingSample> pending;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    const auto parse_fail = [&](const std::string& what) {
      throw Error(source_name + ":" + std::to_string(line_no) + ": " + what);
    };

    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const auto pos = rest.find(',');
      if (pos == std::string_view::npos) {
        fields.push_back(rest);
        break;
      }
      fields.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    if (fields.size() < 4) parse_fail("expected <sample_id>,<dim_id>,<label>,<values...>");

    const std::string sample_id(fields[0]);
    if (sample_id.empty()) parse_fail("empty sample id");

    std::uint32_t dim_id = 0;
    {
      const auto* first = fields[1].data();
      const auto* last = first + fields[1].size();
      const auto [ptr, ec] = std::from_chars(first, last, dim_id);
      if (ec != std::errc() || ptr != last) parse_fail("bad dim_id '" + std::string(fields[1]) + "'");
    }

    const std::string label(fields[2]);

    Series values;
    values.reserve(fields.size() - 3);
    for (std::size_t i = 3; i < fields.size(); ++i) {
      double v = 0.0;
      const auto* first = fields[i].data();
      const auto* last = first + fields[i].size();
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) parse_fail("bad value '" + std::string(fields[i]) + "'");
      if (!std::isfinite(v)) parse_fail("non-finite value");
      values.push_back(v);
    }

    auto it = index_of.find(sample_id);
    if (it == index_of.end()) {
      it = index_of.emplace(sample_id, pending.size()).first;
      order.push_back(sample_id);
      pending.emplace_back();
      pending.back().label = label;
      pending.back().value_count = values.size();
    }
    PendingSample& ps = pending[it->second];
    if (ps.label != label)
      throw Error(source_name + ": sample '" + sample_id + "' has conflicting labels ('" + ps.label +
                  "' vs '" + label + "')");
    if (ps.value_count != values.size())
      throw Error(source_name + ": sample '" + sample_id + "' has records of different lengths (" +
                  std::to_string(ps.value_count) + " vs " + std::to_string(values.size()) + ")");
    if (dim_id >= ps.dims_by_id.size()) {
      ps.dims_by_id.resize(dim_id + 1);
      ps.seen.resize(dim_id + 1, false);
    }
    if (ps.seen[dim_id])
      throw Error(source_name + ": sample '" + sample_id + "' repeats dim_id " + std::to_string(dim_id));
    ps.seen[dim_id] = true;
    ps.dims_by_id[dim_id] = std::move(values);
  }

  if (pending.empty()) throw Error(source_name + ": no samples");

  Dataset ds;
  ds.samples.reserve(pending.size());
  const std::size_t m = pending.front().dims_by_id.size();
  for (std::size_t i = 0; i < pending.size(); ++i) {
    PendingSample& ps = pending[i];
    if (ps.dims_by_id.size() != m)
      throw Error(source_name + ": sample '" + order[i] + "' has " +
                  std::to_string(ps.dims_by_id.size()) + " dimensions, expected " + std::to_string(m));
    for (std::size_t d = 0; d < ps.dims_by_id.size(); ++d)
      if (!ps.seen[d])
        throw Error(source_name + ": sample '" + order[i] + "' is missing dim_id " + std::to_string(d));
    MultivariateSeries sample;
    sample.label = ps.label;
    sample.dimensions = std::move(ps.dims_by_id);
    ds.samples.push_back(std::move(sample));
  }
  ds.rebuild_class_universe();
  return ds;
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file '" + path + "'");
  return load_dataset(in, path);
}

inline void format_value(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

inline void save_dataset(const Dataset& ds, std::ostream& out) {
  std::string line;
  for (std::size_t si = 0; si < ds.samples.size(); ++si) {
    const auto& sample = ds.samples[si];
    for (std::size_t d = 0; d < sample.dim_count(); ++d) {
      line.clear();
      line += std::to_string(si);
      line += ',';
      line += std::to_string(d);
      line += ',';
      line += sample.label;
      for (double v : sample.dimensions[d]) {
        line += ',';
        format_value(line, v);
      }
      line += '\n';
      out << line;
    }
  }
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file '" + path + "'");
  save_dataset(ds, out);
}

}  // namespace muse
