#include "baomi/records.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "baomi/rng.hpp"

namespace baomi {

namespace {

constexpr std::array<char, 4> kMagic = {'F', 'V', 'C', '1'};

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T le(const char* what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FvecError(FvecError::Kind::truncated,
                      std::string("fvec truncated while reading ") + what + " at byte " +
                          std::to_string(pos_));
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.emplace_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

std::string_view label_name(Label label) {
  return label == Label::present ? "present" : "absent";
}

std::string encode_fvec(const std::vector<FeatureRecord>& records) {
  if (records.empty()) {
    throw FvecError(FvecError::Kind::empty, "fvec: refusing to write an empty record list");
  }
  const std::size_t dim = records.front().values.size();
  if (dim == 0) {
    throw FvecError(FvecError::Kind::dimension_mismatch, "fvec: dimension 0 is not allowed");
  }
  std::string out(kMagic.begin(), kMagic.end());
  put_le<std::uint16_t>(out, kFvecVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  for (const FeatureRecord& r : records) {
    if (r.values.size() != dim) {
      throw FvecError(FvecError::Kind::dimension_mismatch,
                      "fvec: record '" + r.recording_id + "' has dimension " +
                          std::to_string(r.values.size()) + ", expected " +
                          std::to_string(dim));
    }
    if (r.recording_id.size() > UINT16_MAX) {
      throw FvecError(FvecError::Kind::io, "fvec: recording id longer than 65535 bytes");
    }
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.recording_id.size()));
    out += r.recording_id;
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(r.label));
    for (float v : r.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<FeatureRecord> decode_fvec(std::string_view bytes) {
  Reader in(bytes);
  const std::string_view magic = in.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw FvecError(FvecError::Kind::bad_magic, "fvec: bad magic '" + std::string(magic) + "'");
  }
  const auto version = in.le<std::uint16_t>("version");
  if (version != kFvecVersion) {
    throw FvecError(FvecError::Kind::bad_version,
                    "fvec: unsupported version " + std::to_string(version));
  }
  const auto count = in.le<std::uint32_t>("record count");
  const auto dim = in.le<std::uint32_t>("dimension");

  std::vector<FeatureRecord> records;
  records.reserve(std::min<std::size_t>(count, in.remaining() / (3 + 4ull * dim) + 1));
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureRecord r;
    const auto id_len = in.le<std::uint16_t>("id length");
    r.recording_id = std::string(in.take(id_len, "id"));
    const auto label = in.le<std::uint8_t>("label");
    if (label > 1) {
      throw FvecError(FvecError::Kind::bad_label, "fvec: record '" + r.recording_id +
                                                       "' has label " + std::to_string(label));
    }
    r.label = static_cast<Label>(label);
    r.values.resize(dim);
    for (float& v : r.values) v = std::bit_cast<float>(in.le<std::uint32_t>("values"));
    records.push_back(std::move(r));
  }
  if (in.remaining() != 0) {
    throw FvecError(FvecError::Kind::trailing_bytes,
                    "fvec: " + std::to_string(in.remaining()) +
                        " bytes beyond the records declared in the header");
  }
  return records;
}

void write_fvec(const std::vector<FeatureRecord>& records, const std::filesystem::path& path) {
  const std::string bytes = encode_fvec(records);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FvecError(FvecError::Kind::io, "cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FvecError(FvecError::Kind::io, "write failed for " + path.string());
}

std::vector<FeatureRecord> read_fvec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FvecError(FvecError::Kind::io, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_fvec(bytes);
  } catch (const FvecError& e) {
    throw FvecError(e.kind(), path.string() + ": " + e.what());
  }
}

std::optional<Label> parse_label(std::string_view raw) {
  const std::string l = lower(trim(raw));
  if (l == "present") return Label::present;
  if (l == "absent") return Label::absent;
  if (l == "unknown") return std::nullopt;
  throw ManifestError("unrecognized label '" + std::string(raw) + "'");
}

DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  DatasetManifest manifest;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  bool header_done = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (!header_done) {
      if (cells.size() != 3 || lower(cells[0]) != "recording_id" ||
          lower(cells[1]) != "wav_path" || lower(cells[2]) != "label") {
        throw ManifestError("manifest header must be 'recording_id,wav_path,label'");
      }
      header_done = true;
      continue;
    }
    if (cells.size() != 3) {
      throw ManifestError("manifest line " + std::to_string(line_no) + ": expected 3 fields, got " +
                          std::to_string(cells.size()));
    }
    if (cells[0].empty()) {
      throw ManifestError("manifest line " + std::to_string(line_no) + ": empty recording_id");
    }
    if (!seen.insert(cells[0]).second) {
      throw ManifestError("manifest line " + std::to_string(line_no) +
                          ": duplicate recording_id '" + cells[0] + "'");
    }
    parse_label(cells[2]);  // validate early
    std::filesystem::path wav(cells[1]);
    if (wav.is_relative() && !base_dir.empty()) wav = base_dir / wav;
    manifest.rows.push_back({cells[0], wav, cells[2]});
  }
  if (!header_done) throw ManifestError("manifest is empty");
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), path.parent_path());
}

FilteredManifest filter_known_labels(const DatasetManifest& manifest) {
  FilteredManifest out;
  for (const ManifestRow& row : manifest.rows) {
    if (parse_label(row.raw_label)) {
      out.kept.push_back(row);
    } else {
      out.skipped_unknown.push_back(row);
    }
  }
  return out;
}

std::vector<std::string> FoldAssignment::ids_in_fold(std::size_t fold) const {
  std::vector<std::string> ids;
  for (const auto& [id, f] : fold_of)
    if (f == fold) ids.push_back(id);
  return ids;
}

FoldAssignment make_folds(const std::vector<FeatureRecord>& records, std::uint64_t seed,
                          std::size_t n_folds) {
  if (n_folds < 2) throw FoldError("need at least 2 folds");
  std::array<std::vector<std::string>, 2> by_class;
  std::set<std::string> seen;
  for (const FeatureRecord& r : records) {
    if (!seen.insert(r.recording_id).second) {
      throw FoldError("duplicate recording id '" + r.recording_id + "'");
    }
    by_class[class_index(r.label)].push_back(r.recording_id);
  }

  FoldAssignment assignment;
  assignment.seed = seed;
  assignment.n_folds = n_folds;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& ids = by_class[c];
    if (ids.size() < n_folds) {
      throw FoldError("class " + std::string(label_name(static_cast<Label>(c))) + " has " +
                      std::to_string(ids.size()) + " records, need at least " +
                      std::to_string(n_folds));
    }
    std::sort(ids.begin(), ids.end());
    Rng rng(derive_seed(seed, {0xF01D, c}));
    rng.shuffle(std::span(ids));
    for (std::size_t i = 0; i < ids.size(); ++i) assignment.fold_of[ids[i]] = i % n_folds;
  }
  return assignment;
}

}  // namespace baomi
