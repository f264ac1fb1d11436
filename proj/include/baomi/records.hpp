#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace baomi {

enum class Label : std::uint8_t { absent = 0, present = 1 };

inline std::size_t class_index(Label label) { return static_cast<std::size_t>(label); }
std::string_view label_name(Label label);

/// One recording's fixed-length representation. Values keep the 32-bit width
/// they have on disk; models widen them when batches are assembled.
struct FeatureRecord {
  std::string recording_id;
  Label label = Label::absent;
  std::vector<float> values;

  bool operator==(const FeatureRecord&) const = default;
};

class FvecError : public std::runtime_error {
 public:
  enum class Kind {
    io,
    bad_magic,
    bad_version,
    truncated,
    trailing_bytes,
    dimension_mismatch,
    bad_label,
    empty,
  };
  FvecError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Little-endian layout: "FVC1", u16 version = 1, u32 count, u32 dim, then per
// record u16 id length, id bytes, u8 label, dim x f32.
inline constexpr std::uint16_t kFvecVersion = 1;

void write_fvec(const std::vector<FeatureRecord>& records,
                const std::filesystem::path& path);
std::vector<FeatureRecord> read_fvec(const std::filesystem::path& path);

// The same encoding to and from memory.
std::string encode_fvec(const std::vector<FeatureRecord>& records);
std::vector<FeatureRecord> decode_fvec(std::string_view bytes);

struct ManifestRow {
  std::string recording_id;
  std::filesystem::path wav_path;
  std::string raw_label;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CSV with header `recording_id,wav_path,label`. Relative wav paths are
/// resolved against the manifest's directory.
struct DatasetManifest {
  std::vector<ManifestRow> rows;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(std::string_view text,
                               const std::filesystem::path& base_dir = {});

// present/absent (any case); nullopt for unknown; throws on anything else.
std::optional<Label> parse_label(std::string_view raw);

struct FilteredManifest {
  std::vector<ManifestRow> kept;
  std::vector<ManifestRow> skipped_unknown;
};

FilteredManifest filter_known_labels(const DatasetManifest& manifest);

/// Stratified assignment of recordings to cross-validation folds.
struct FoldAssignment {
  std::map<std::string, std::size_t> fold_of;
  std::uint64_t seed = 0;
  std::size_t n_folds = 5;

  std::vector<std::string> ids_in_fold(std::size_t fold) const;
};

class FoldError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Per class: ids sorted, shuffled with a seeded stream, dealt round-robin.
FoldAssignment make_folds(const std::vector<FeatureRecord>& records, std::uint64_t seed,
                          std::size_t n_folds = 5);

}  // namespace baomi
