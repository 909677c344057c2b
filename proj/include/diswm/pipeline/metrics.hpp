#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "diswm/diffcore/checkpoint.hpp"

namespace diswm {

struct MetricRow {
  std::uint64_t step = 0;
  std::string name;
  double value = 0.0;

  bool operator==(const MetricRow&) const = default;
};

/// Append-only (step, name, value) rows. Steps never decrease within one
/// metric name.
class MetricsLog {
 public:
  /// Throws ContractError if `step` is below the metric's last step.
  void append(std::uint64_t step, const std::string& name, double value);

  const std::vector<MetricRow>& rows() const noexcept { return rows_; }
  std::vector<MetricRow> series(const std::string& name) const;

  /// "step,name,value" header then one row per line, values as %.17g.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
  static MetricsLog read_csv(const std::filesystem::path& path);

  void save(Checkpoint& ckpt, const std::string& prefix) const;
  static MetricsLog load(const Checkpoint& ckpt, const std::string& prefix);

 private:
  std::vector<MetricRow> rows_;
  std::map<std::string, std::uint64_t> last_step_;
};

}  // namespace diswm
