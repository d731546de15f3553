#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace cdecf {

/// One raw (user, item, timestamp) interaction after parsing.
struct RawInteraction {
  std::string user_key;
  std::string item_key;
  std::int64_t timestamp = 0;
};

struct IngestStats {
  std::size_t total_records = 0;     // lines seen (excluding skipped header)
  std::size_t malformed = 0;         // unparseable or empty-key lines
  std::size_t duplicate_pairs = 0;   // repeat (user, item) pairs collapsed
};

struct IngestOptions {
  char delimiter = ',';
  bool skip_header = false;
  // 0-based field positions; extra fields on a line are ignored. Amazon
  // ratings CSVs (user,item,rating,timestamp) need timestamp_field = 3.
  std::size_t user_field = 0;
  std::size_t item_field = 1;
  std::size_t timestamp_field = 2;
};

/// Parse an interaction stream, dropping malformed lines and collapsing
/// duplicate (user, item) pairs to their earliest timestamp. Output order is
/// deterministic (sorted by user_key, item_key).
std::vector<RawInteraction> ingest(std::istream& in, const IngestOptions& opts,
                                   IngestStats& stats);

/// Remove every interaction of users with fewer than k distinct items.
/// Single pass over users only; items are never filtered directly.
std::vector<RawInteraction> kcore_filter_users(
    std::vector<RawInteraction> interactions, std::size_t k = 5);

/// Fully processed dataset with dense contiguous ids and per-user
/// leave-one-out splits. Immutable once built; safe to share across threads.
struct InteractionDataset {
  std::size_t num_users = 0;
  std::size_t num_items = 0;

  // Train pairs grouped by ascending user, chronological within a user.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> train;
  // Exactly one held-out item per user, indexed by user id.
  std::vector<std::uint32_t> validation;
  std::vector<std::uint32_t> test;

  // Derived views (rebuilt on load, not persisted separately).
  std::vector<std::vector<std::uint32_t>> train_items_sorted;  // membership
  std::vector<std::vector<std::uint32_t>> user_histories;      // chrono, full

  // id -> original key, in id order.
  std::vector<std::string> user_keys;
  std::vector<std::string> item_keys;

  bool user_has_train_item(std::uint32_t user, std::uint32_t item) const;
  double sparsity() const;

  void save(const std::string& path) const;
  static InteractionDataset load(const std::string& path);

  /// Recompute train_items_sorted and user_histories from the split arrays.
  void rebuild_derived();
};

/// Chronological leave-one-out split: per user the last interaction goes to
/// test, the second-to-last to validation, the rest to train. Timestamp ties
/// break by ascending item id. Ids are assigned by sorted key order.
InteractionDataset build_splits(const std::vector<RawInteraction>& interactions);

}  // namespace cdecf
