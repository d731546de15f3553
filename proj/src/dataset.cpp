#include "cdecf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cdecf/errors.hpp"
#include "cdecf/io_util.hpp"

namespace cdecf {

namespace {

constexpr char kMagic[8] = {'C', 'D', 'E', 'C', 'F', '-', 'D', 'S'};
constexpr std::uint16_t kFormatVersion = 1;

bool parse_timestamp(const std::string& field, std::int64_t& out) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

bool split_fields(const std::string& line, char delim,
                  std::vector<std::string>& fields) {
  fields.clear();
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return !fields.empty();
}

}  // namespace

std::vector<RawInteraction> ingest(std::istream& in, const IngestOptions& opts,
                                   IngestStats& stats) {
  if (!in) throw DataError("unreadable interaction source");
  stats = IngestStats{};

  const std::size_t needed =
      std::max({opts.user_field, opts.item_field, opts.timestamp_field}) + 1;

  // (user, item) -> earliest timestamp
  std::map<std::pair<std::string, std::string>, std::int64_t> earliest;

  std::string line;
  std::vector<std::string> fields;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && opts.skip_header) {
      first = false;
      continue;
    }
    first = false;
    if (line.empty()) continue;
    ++stats.total_records;

    split_fields(line, opts.delimiter, fields);
    std::int64_t ts = 0;
    if (fields.size() < needed || fields[opts.user_field].empty() ||
        fields[opts.item_field].empty() ||
        !parse_timestamp(fields[opts.timestamp_field], ts)) {
      ++stats.malformed;
      continue;
    }

    auto key = std::make_pair(fields[opts.user_field], fields[opts.item_field]);
    auto [it, inserted] = earliest.emplace(std::move(key), ts);
    if (!inserted) {
      ++stats.duplicate_pairs;
      it->second = std::min(it->second, ts);
    }
  }
  if (in.bad()) throw DataError("I/O error while reading interaction source");

  std::vector<RawInteraction> out;
  out.reserve(earliest.size());
  for (auto& [key, ts] : earliest)
    out.push_back({key.first, key.second, ts});
  return out;
}

std::vector<RawInteraction> kcore_filter_users(
    std::vector<RawInteraction> interactions, std::size_t k) {
  if (k < 1) throw ConfigError("k-core requires k >= 1");

  std::unordered_map<std::string, std::unordered_set<std::string>> items_of;
  for (const auto& r : interactions) items_of[r.user_key].insert(r.item_key);

  std::vector<RawInteraction> kept;
  kept.reserve(interactions.size());
  for (auto& r : interactions) {
    if (items_of[r.user_key].size() >= k) kept.push_back(std::move(r));
  }
  if (kept.empty()) throw DataError("dataset vanished under k-core");
  return kept;
}

InteractionDataset build_splits(
    const std::vector<RawInteraction>& interactions) {
  // Dense ids by sorted key order (stream-order independent).
  std::vector<std::string> user_keys, item_keys;
  {
    std::unordered_set<std::string> useen, iseen;
    for (const auto& r : interactions) {
      if (useen.insert(r.user_key).second) user_keys.push_back(r.user_key);
      if (iseen.insert(r.item_key).second) item_keys.push_back(r.item_key);
    }
  }
  std::sort(user_keys.begin(), user_keys.end());
  std::sort(item_keys.begin(), item_keys.end());

  std::unordered_map<std::string, std::uint32_t> user_id, item_id;
  for (std::uint32_t i = 0; i < user_keys.size(); ++i) user_id[user_keys[i]] = i;
  for (std::uint32_t i = 0; i < item_keys.size(); ++i) item_id[item_keys[i]] = i;

  // Per-user (timestamp, item) with a total order: ties break by item id.
  std::vector<std::vector<std::pair<std::int64_t, std::uint32_t>>> per_user(
      user_keys.size());
  for (const auto& r : interactions)
    per_user[user_id[r.user_key]].emplace_back(r.timestamp, item_id[r.item_key]);

  InteractionDataset ds;
  ds.num_users = user_keys.size();
  ds.num_items = item_keys.size();
  ds.user_keys = std::move(user_keys);
  ds.item_keys = std::move(item_keys);
  ds.validation.resize(ds.num_users);
  ds.test.resize(ds.num_users);

  for (std::uint32_t u = 0; u < per_user.size(); ++u) {
    auto& hist = per_user[u];
    if (hist.size() < 3) {
      throw DataError("user " + ds.user_keys[u] +
                      " has fewer than 3 interactions; cannot split");
    }
    std::sort(hist.begin(), hist.end());
    ds.test[u] = hist[hist.size() - 1].second;
    ds.validation[u] = hist[hist.size() - 2].second;
    for (std::size_t i = 0; i + 2 < hist.size(); ++i)
      ds.train.emplace_back(u, hist[i].second);
  }

  ds.rebuild_derived();
  return ds;
}

void InteractionDataset::rebuild_derived() {
  train_items_sorted.assign(num_users, {});
  user_histories.assign(num_users, {});
  for (const auto& [u, i] : train) {
    train_items_sorted[u].push_back(i);
    user_histories[u].push_back(i);
  }
  for (std::uint32_t u = 0; u < num_users; ++u) {
    std::sort(train_items_sorted[u].begin(), train_items_sorted[u].end());
    user_histories[u].push_back(validation[u]);
    user_histories[u].push_back(test[u]);
  }
}

bool InteractionDataset::user_has_train_item(std::uint32_t user,
                                             std::uint32_t item) const {
  const auto& items = train_items_sorted[user];
  return std::binary_search(items.begin(), items.end(), item);
}

double InteractionDataset::sparsity() const {
  const double total =
      static_cast<double>(train.size() + validation.size() + test.size());
  return total / (static_cast<double>(num_users) * static_cast<double>(num_items));
}

void InteractionDataset::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);

  out.write(kMagic, sizeof(kMagic));
  io::write_pod<std::uint16_t>(out, kFormatVersion);
  io::write_pod<std::uint64_t>(out, num_users);
  io::write_pod<std::uint64_t>(out, num_items);

  auto write_pairs =
      [&out](const std::vector<std::pair<std::uint32_t, std::uint32_t>>& ps) {
        io::write_pod<std::uint64_t>(out, ps.size());
        for (const auto& [u, i] : ps) {
          io::write_pod<std::uint32_t>(out, u);
          io::write_pod<std::uint32_t>(out, i);
        }
      };
  write_pairs(train);

  auto write_per_user = [&out](const std::vector<std::uint32_t>& items) {
    io::write_pod<std::uint64_t>(out, items.size());
    for (std::uint32_t u = 0; u < items.size(); ++u) {
      io::write_pod<std::uint32_t>(out, u);
      io::write_pod<std::uint32_t>(out, items[u]);
    }
  };
  write_per_user(validation);
  write_per_user(test);

  auto write_keys = [&out](const std::vector<std::string>& keys) {
    io::write_pod<std::uint64_t>(out, keys.size());
    for (const auto& k : keys) io::write_string(out, k);
  };
  write_keys(user_keys);
  write_keys(item_keys);

  if (!out) throw DataError("write failed: " + path);
}

InteractionDataset InteractionDataset::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file: " + path);
  const auto file_size = std::filesystem::file_size(path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("incompatible dataset file (bad magic): " + path);
  const auto version = io::read_pod<std::uint16_t>(in, "version");
  if (version != kFormatVersion)
    throw DataError("incompatible dataset file (version " +
                    std::to_string(version) + "): " + path);

  // A corrupt length prefix must not turn into a giant allocation.
  auto check_count = [file_size, &path](std::uint64_t count, std::size_t unit,
                                        const char* what) {
    if (count > file_size / unit)
      throw DataError("corrupt dataset (" + std::string(what) +
                      " count exceeds file size): " + path);
  };

  InteractionDataset ds;
  ds.num_users = io::read_pod<std::uint64_t>(in, "num_users");
  ds.num_items = io::read_pod<std::uint64_t>(in, "num_items");
  if (ds.num_users == 0 || ds.num_items == 0 ||
      ds.num_users > UINT32_MAX || ds.num_items > UINT32_MAX)
    throw DataError("corrupt dataset (implausible U/I): " + path);

  const auto train_count = io::read_pod<std::uint64_t>(in, "train size");
  check_count(train_count, 8, "train");
  ds.train.reserve(train_count);
  for (std::uint64_t k = 0; k < train_count; ++k) {
    const auto u = io::read_pod<std::uint32_t>(in, "train pair");
    const auto i = io::read_pod<std::uint32_t>(in, "train pair");
    if (u >= ds.num_users || i >= ds.num_items)
      throw DataError("corrupt dataset (train index out of range): " + path);
    ds.train.emplace_back(u, i);
  }

  auto read_per_user = [&in, &ds](const char* what) {
    const auto count = io::read_pod<std::uint64_t>(in, what);
    if (count != ds.num_users)
      throw DataError(std::string("corrupt dataset: ") + what + " count mismatch");
    std::vector<std::uint32_t> items(count);
    for (std::uint64_t k = 0; k < count; ++k) {
      const auto u = io::read_pod<std::uint32_t>(in, what);
      const auto i = io::read_pod<std::uint32_t>(in, what);
      if (u >= count || i >= ds.num_items)
        throw DataError(std::string("corrupt dataset: ") + what);
      items[u] = i;
    }
    return items;
  };
  ds.validation = read_per_user("validation split");
  ds.test = read_per_user("test split");

  auto read_keys = [&in, &check_count](const char* what) {
    const auto count = io::read_pod<std::uint64_t>(in, what);
    check_count(count, 4, what);
    std::vector<std::string> keys;
    keys.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k)
      keys.push_back(io::read_string(in, what));
    return keys;
  };
  ds.user_keys = read_keys("user key table");
  ds.item_keys = read_keys("item key table");
  if (ds.user_keys.size() != ds.num_users ||
      ds.item_keys.size() != ds.num_items)
    throw DataError("corrupt dataset: key table size mismatch");

  ds.rebuild_derived();
  return ds;
}

}  // namespace cdecf
