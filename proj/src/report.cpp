#include "fcnseg/report.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fcnseg::report {

KvMap read_kv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read record: " + path);
  KvMap kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

namespace {

std::string get(const KvMap& kv, const std::string& key, const std::string& fallback = "-") {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

std::vector<std::string> ordered_values(const std::vector<KvMap>& records, const std::string& key) {
  std::vector<std::string> out;
  for (const auto& r : records) {
    const std::string v = get(r, key, "");
    if (!v.empty() && std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

const KvMap* find_record(const std::vector<KvMap>& records,
                         const std::vector<std::pair<std::string, std::string>>& where) {
  for (const auto& r : records) {
    bool ok = true;
    for (const auto& [k, v] : where)
      if (get(r, k, "") != v) ok = false;
    if (ok) return &r;
  }
  return nullptr;
}

}  // namespace

std::string metrics_table(const std::vector<KvMap>& records) {
  const auto datasets = ordered_values(records, "dataset");
  const auto variants = ordered_values(records, "variant");
  const char* indices[] = {"jsi", "dsc", "sensitivity", "specificity", "mcc"};

  std::ostringstream os;
  os << "variant";
  for (const char* idx : indices)
    for (const auto& d : datasets) os << "\t" << idx << ":" << d;
  os << "\n";
  for (const auto& v : variants) {
    os << v;
    for (const char* idx : indices)
      for (const auto& d : datasets) {
        const KvMap* r = find_record(records, {{"variant", v}, {"dataset", d}});
        os << "\t" << (r ? get(*r, std::string("test_") + idx + "_mean") : "-");
      }
    os << "\n";
  }
  return os.str();
}

std::string solver_table(const std::vector<KvMap>& records) {
  const auto datasets = ordered_values(records, "dataset");
  const auto solvers = ordered_values(records, "solver");
  std::ostringstream os;
  os << "solver";
  for (const auto& d : datasets) os << "\tjsi:" << d;
  os << "\n";
  for (const auto& s : solvers) {
    os << s;
    for (const auto& d : datasets) {
      const KvMap* r = find_record(records, {{"solver", s}, {"dataset", d}});
      os << "\t" << (r ? get(*r, "test_jsi_mean") : "-");
    }
    os << "\n";
  }
  return os.str();
}

std::string postproc_table(const std::vector<KvMap>& records) {
  const auto datasets = ordered_values(records, "dataset");
  std::ostringstream os;
  os << "dataset\tjsi_without_postproc\tjsi_with_postproc\n";
  for (const auto& d : datasets) {
    const KvMap* r = find_record(records, {{"dataset", d}});
    if (!r) continue;
    os << d << "\t" << get(*r, "test_jsi_mean") << "\t" << get(*r, "test_post_jsi_mean") << "\n";
  }
  return os.str();
}

std::string timing_table(const std::vector<KvMap>& records) {
  const auto datasets = ordered_values(records, "dataset");
  const auto variants = ordered_values(records, "variant");
  std::ostringstream os;
  os << "variant:solver";
  for (const auto& d : datasets) os << "\tmean_s:" << d;
  os << "\n";
  for (const auto& v : variants) {
    std::set<std::string> solvers;
    for (const auto& r : records)
      if (get(r, "variant", "") == v) solvers.insert(get(r, "solver"));
    for (const auto& s : solvers) {
      os << v << ":" << s;
      for (const auto& d : datasets) {
        const KvMap* r = find_record(records, {{"variant", v}, {"solver", s}, {"dataset", d}});
        if (r && r->count("bench_total_ms_mean")) {
          os << "\t" << std::stod(get(*r, "bench_total_ms_mean")) / 1000.0;
        } else {
          os << "\t-";
        }
      }
      os << "\n";
    }
  }
  return os.str();
}

std::string as_kv_block(const std::vector<KvMap>& records) {
  std::ostringstream os;
  for (size_t i = 0; i < records.size(); ++i)
    for (const auto& [k, v] : records[i]) os << "record" << i << "." << k << "=" << v << "\n";
  return os.str();
}

}  // namespace fcnseg::report
