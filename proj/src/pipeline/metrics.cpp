#include "diswm/pipeline/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "diswm/diffcore/errors.hpp"

namespace diswm {

void MetricsLog::append(std::uint64_t step, const std::string& name, double value) {
  if (name.empty() || name.find_first_of(",\n") != std::string::npos) {
    throw ContractError("metric name '" + name + "' is not CSV-safe");
  }
  auto it = last_step_.find(name);
  if (it != last_step_.end() && step < it->second) {
    throw ContractError("metric '" + name + "' step went backwards (" + std::to_string(step) + " after " +
                        std::to_string(it->second) + ")");
  }
  last_step_[name] = step;
  rows_.push_back({step, name, value});
}

std::vector<MetricRow> MetricsLog::series(const std::string& name) const {
  std::vector<MetricRow> out;
  for (const auto& r : rows_) {
    if (r.name == name) out.push_back(r);
  }
  return out;
}

std::string MetricsLog::to_csv() const {
  std::string out = "step,name,value\n";
  char buf[64];
  for (const auto& r : rows_) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out += std::to_string(r.step);
    out += ',';
    out += r.name;
    out += ',';
    out += buf;
    out += '\n';
  }
  return out;
}

void MetricsLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write metrics '" + path.string() + "'");
  const std::string text = to_csv();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing metrics '" + path.string() + "'");
}

MetricsLog MetricsLog::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "step,name,value") {
    throw LoadError(path.string() + ": missing metrics header");
  }
  MetricsLog log;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.rfind(',');
    if (a == std::string::npos || a == b) throw LoadError(path.string() + ":" + std::to_string(lineno) + ": bad row");
    try {
      log.append(std::stoull(line.substr(0, a)), line.substr(a + 1, b - a - 1), std::stod(line.substr(b + 1)));
    } catch (const std::logic_error&) {
      throw LoadError(path.string() + ":" + std::to_string(lineno) + ": bad row");
    }
  }
  return log;
}

// Rows are grouped per metric; a shared sequence index restores the order.
void MetricsLog::save(Checkpoint& ckpt, const std::string& prefix) const {
  std::map<std::string, std::vector<std::size_t>> by_name;
  for (std::size_t i = 0; i < rows_.size(); ++i) by_name[rows_[i].name].push_back(i);
  std::vector<std::uint64_t> count{rows_.size()};
  ckpt.put_u64(prefix + "count", count);
  for (const auto& [name, idx] : by_name) {
    std::vector<std::uint64_t> seq, steps;
    std::vector<double> values;
    for (std::size_t i : idx) {
      seq.push_back(i);
      steps.push_back(rows_[i].step);
      values.push_back(rows_[i].value);
    }
    ckpt.put_u64(prefix + name + "/seq", seq);
    ckpt.put_u64(prefix + name + "/step", steps);
    ckpt.put(prefix + name + "/value", {values.size()}, values);
  }
}

MetricsLog MetricsLog::load(const Checkpoint& ckpt, const std::string& prefix) {
  const auto& count = ckpt.u64(prefix + "count");
  if (count.size() != 1) throw LoadError("metrics count entry is malformed");
  std::vector<MetricRow> rows(count[0]);
  std::vector<bool> filled(count[0], false);
  const std::string suffix = "/seq";
  for (const std::string& key : ckpt.names()) {
    if (key.rfind(prefix, 0) != 0 || key.size() < prefix.size() + suffix.size() ||
        key.compare(key.size() - suffix.size(), suffix.size(), suffix) != 0) {
      continue;
    }
    const std::string name = key.substr(prefix.size(), key.size() - prefix.size() - suffix.size());
    const auto& seq = ckpt.u64(key);
    const auto& steps = ckpt.u64(prefix + name + "/step");
    const auto& values = ckpt.f64(prefix + name + "/value");
    if (steps.size() != seq.size() || values.size() != seq.size()) {
      throw LoadError("metric '" + name + "' arrays disagree in length");
    }
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (seq[i] >= rows.size() || filled[seq[i]]) throw LoadError("metric '" + name + "' has a bad row index");
      rows[seq[i]] = {steps[i], name, values[i]};
      filled[seq[i]] = true;
    }
  }
  MetricsLog log;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!filled[i]) throw LoadError("metrics row " + std::to_string(i) + " is missing");
    log.append(rows[i].step, rows[i].name, rows[i].value);
  }
  return log;
}

}  // namespace diswm
