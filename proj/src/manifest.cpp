#include "fcnseg/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fcnseg/tensor.hpp"

namespace fcnseg {

int select_mid_scan(const SubjectScans& subject) {
  switch (subject.scan_count()) {
    case 13: return 7;
    case 26: return 13;
    default:
      throw std::invalid_argument("subject " + subject.subject_id + " has " +
                                  std::to_string(subject.scan_count()) +
                                  " scans; the protocol expects 13 or 26");
  }
}

DatasetTag parse_dataset_tag(const std::string& name) {
  if (name == "md") return DatasetTag::md;
  if (name == "wd") return DatasetTag::wd;
  if (name == "ad") return DatasetTag::ad;
  throw std::invalid_argument("unknown dataset tag '" + name + "' (expected md|wd|ad)");
}

std::string dataset_tag_name(DatasetTag tag) {
  switch (tag) {
    case DatasetTag::md: return "md";
    case DatasetTag::wd: return "wd";
    case DatasetTag::ad: return "ad";
  }
  return "?";
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + name + "' (expected train|val|test)");
}

std::vector<const ManifestItem*> DatasetManifest::in_split(Split s) const {
  std::vector<const ManifestItem*> out;
  for (const auto& item : items)
    if (item.split == s) out.push_back(&item);
  return out;
}

int64_t DatasetManifest::count(Split s) const {
  int64_t n = 0;
  for (const auto& item : items) n += item.split == s;
  return n;
}

namespace {

ManifestItem subject_item(const SubjectScans& s, int scan_index_1based) {
  ManifestItem it;
  it.image = s.images[scan_index_1based - 1];
  it.mask = s.masks.empty() ? "" : s.masks[scan_index_1based - 1];
  it.subject = s.subject_id;
  it.scan_index = scan_index_1based;
  return it;
}

/// One item per subject: the protocol mid-scan, or the sole image of an
/// already-collapsed single-scan pool.
std::vector<ManifestItem> mid_scan_items(const std::vector<SubjectScans>& pool) {
  std::vector<ManifestItem> items;
  for (const auto& s : pool) {
    if (s.images.empty()) throw std::invalid_argument("subject " + s.subject_id + " has no scans");
    items.push_back(subject_item(s, s.scan_count() == 1 ? 1 : select_mid_scan(s)));
  }
  return items;
}

std::vector<ManifestItem> all_scan_items(const std::vector<SubjectScans>& pool) {
  std::vector<ManifestItem> items;
  for (const auto& s : pool)
    for (int i = 1; i <= s.scan_count(); ++i) items.push_back(subject_item(s, i));
  return items;
}

void shuffle_seeded(std::vector<ManifestItem>& items, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(items.begin(), items.end(), rng);
}

int64_t rounded(double v) { return static_cast<int64_t>(std::llround(v)); }

/// Item-level split of an already-shuffled list into train/val (counts
/// clamped to what is available).
void assign_train_val(std::vector<ManifestItem>& items, int64_t train_n) {
  train_n = std::min<int64_t>(train_n, static_cast<int64_t>(items.size()));
  for (size_t i = 0; i < items.size(); ++i)
    items[i].split = static_cast<int64_t>(i) < train_n ? Split::train : Split::val;
}

}  // namespace

DatasetManifest build_manifest(DatasetTag tag, const SubjectPools& pools, uint64_t seed) {
  DatasetManifest m;
  m.tag = tag;

  if (tag == DatasetTag::md) {
    if (pools.md.empty()) throw std::invalid_argument("build_manifest: md pool is empty");
    auto items = mid_scan_items(pools.md);
    shuffle_seeded(items, derive_seed(seed, "manifest.md"));
    const int64_t n = static_cast<int64_t>(items.size());
    const int64_t train_n = rounded(0.7 * n);
    const int64_t val_n = rounded(0.1 * n);
    for (int64_t i = 0; i < n; ++i)
      items[i].split = i < train_n ? Split::train : (i < train_n + val_n ? Split::val : Split::test);
    m.items = std::move(items);
    return m;
  }

  if (tag == DatasetTag::wd) {
    if (pools.wd.empty()) throw std::invalid_argument("build_manifest: wd pool is empty");
    // subjects are drawn whole into the test split so no subject straddles
    // train and test
    std::vector<SubjectScans> subjects = pools.wd;
    std::mt19937_64 rng(derive_seed(seed, "manifest.wd.subjects"));
    std::shuffle(subjects.begin(), subjects.end(), rng);

    int64_t total = 0;
    for (const auto& s : subjects) total += s.scan_count();
    const int64_t test_target = rounded(0.2 * total);
    const int64_t train_n = rounded(0.7 * total);

    std::vector<ManifestItem> test_items, rest;
    int64_t test_n = 0;
    for (const auto& s : subjects) {
      auto items = all_scan_items({s});
      if (test_n < test_target) {
        for (auto& it : items) it.split = Split::test;
        test_n += static_cast<int64_t>(items.size());
        test_items.insert(test_items.end(), items.begin(), items.end());
      } else {
        rest.insert(rest.end(), items.begin(), items.end());
      }
    }
    shuffle_seeded(rest, derive_seed(seed, "manifest.wd.rest"));
    assign_train_val(rest, train_n);
    m.items = std::move(rest);
    m.items.insert(m.items.end(), test_items.begin(), test_items.end());
    return m;
  }

  // ad: every wd scan goes to train/val at 90/10, every md mid-scan to test
  if (pools.wd.empty() || pools.md.empty())
    throw std::invalid_argument("build_manifest: ad needs both wd and md pools");
  auto trainval = all_scan_items(pools.wd);
  shuffle_seeded(trainval, derive_seed(seed, "manifest.ad"));
  assign_train_val(trainval, rounded(0.9 * static_cast<double>(trainval.size())));
  auto test_items = mid_scan_items(pools.md);
  for (auto& it : test_items) it.split = Split::test;
  m.items = std::move(trainval);
  m.items.insert(m.items.end(), test_items.begin(), test_items.end());
  return m;
}

std::vector<DatasetManifest> kfold_splits(const DatasetManifest& manifest, int k, uint64_t seed) {
  const int64_t n = static_cast<int64_t>(manifest.items.size());
  if (k < 2) throw std::invalid_argument("kfold_splits: k must be at least 2");
  if (k > n) throw std::invalid_argument("kfold_splits: k exceeds item count");

  // group by subject, in order of first appearance
  std::vector<std::string> order;
  std::map<std::string, std::vector<ManifestItem>> by_subject;
  for (const auto& it : manifest.items) {
    if (!by_subject.count(it.subject)) order.push_back(it.subject);
    by_subject[it.subject].push_back(it);
  }

  std::mt19937_64 rng(derive_seed(seed, "kfold"));
  std::shuffle(order.begin(), order.end(), rng);

  // least-loaded greedy packing of subject groups into k test buckets
  std::vector<std::vector<ManifestItem>> buckets(static_cast<size_t>(k));
  for (const auto& subject : order) {
    size_t best = 0;
    for (size_t b = 1; b < buckets.size(); ++b)
      if (buckets[b].size() < buckets[best].size()) best = b;
    const auto& group = by_subject[subject];
    buckets[best].insert(buckets[best].end(), group.begin(), group.end());
  }

  std::vector<DatasetManifest> folds;
  const int64_t train_target = rounded(0.7 * n);
  for (int f = 0; f < k; ++f) {
    DatasetManifest fold;
    fold.tag = manifest.tag;
    std::vector<ManifestItem> rest;
    for (int g = 0; g < k; ++g)
      if (g != f) rest.insert(rest.end(), buckets[g].begin(), buckets[g].end());
    shuffle_seeded(rest, derive_seed(seed, "kfold.rest." + std::to_string(f)));
    assign_train_val(rest, train_target);
    fold.items = std::move(rest);
    for (auto it : buckets[f]) {
      it.split = Split::test;
      fold.items.push_back(it);
    }
    for (auto& it : fold.items) it.fold = f;
    folds.push_back(std::move(fold));
  }
  return folds;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write manifest: " + path);
  os << "# fcnseg manifest tag=" << dataset_tag_name(manifest.tag) << "\n";
  for (const auto& it : manifest.items)
    os << it.image << "\t" << it.mask << "\t" << it.subject << "\t" << it.scan_index << "\t"
       << split_name(it.split) << "\t" << it.fold << "\n";
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read manifest: " + path);
  DatasetManifest m;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first && line.rfind("# fcnseg manifest", 0) == 0) {
      const auto pos = line.find("tag=");
      if (pos != std::string::npos) m.tag = parse_dataset_tag(line.substr(pos + 4));
      first = false;
      continue;
    }
    first = false;
    if (line[0] == '#') continue;
    const auto f = split_tabs(line);
    if (f.size() != 6) throw std::runtime_error("manifest " + path + ": malformed line: " + line);
    ManifestItem it;
    it.image = f[0];
    it.mask = f[1];
    it.subject = f[2];
    it.scan_index = std::stoi(f[3]);
    it.split = parse_split(f[4]);
    it.fold = std::stoi(f[5]);
    m.items.push_back(std::move(it));
  }
  return m;
}

void write_pool(const std::vector<SubjectScans>& pool, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write pool listing: " + path);
  for (const auto& s : pool)
    for (int64_t i = 0; i < s.scan_count(); ++i)
      os << s.images[i] << "\t" << (s.masks.empty() ? "" : s.masks[i]) << "\t" << s.subject_id
         << "\t" << (i + 1) << "\n";
}

std::vector<SubjectScans> read_pool(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read pool listing: " + path);
  std::vector<SubjectScans> pool;
  std::map<std::string, size_t> index;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_tabs(line);
    if (f.size() != 4) throw std::runtime_error("pool listing " + path + ": malformed line: " + line);
    auto [it, inserted] = index.try_emplace(f[2], pool.size());
    if (inserted) pool.push_back(SubjectScans{f[2], {}, {}});
    pool[it->second].images.push_back(f[0]);
    pool[it->second].masks.push_back(f[1]);
  }
  return pool;
}

}  // namespace fcnseg
