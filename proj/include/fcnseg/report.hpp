#pragma once

#include <map>
#include <string>
#include <vector>

namespace fcnseg::report {

using KvMap = std::map<std::string, std::string>;

KvMap read_kv(const std::string& path);

/// Variant-by-dataset grid of the five mean indices.
std::string metrics_table(const std::vector<KvMap>& records);
/// Solver-by-dataset grid of mean JSI.
std::string solver_table(const std::vector<KvMap>& records);
/// Dataset rows, mean JSI without and with post-processing.
std::string postproc_table(const std::vector<KvMap>& records);
/// Variant/solver rows, mean per-image seconds by dataset.
std::string timing_table(const std::vector<KvMap>& records);

std::string as_kv_block(const std::vector<KvMap>& records);

}  // namespace fcnseg::report
