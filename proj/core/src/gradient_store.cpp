#include "spice/gradient_store.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "spice/error.hpp"

namespace spice {
namespace {

std::string position(std::size_t row, std::size_t col) {
  return "row " + std::to_string(row) + ", col " + std::to_string(col);
}

void check_finite(const RowMatrix& data) {
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (!std::isfinite(data(i, j))) {
        throw Error(ErrorCode::NonFiniteValue, "non-finite value at " +
                                                   position(static_cast<std::size_t>(i),
                                                            static_cast<std::size_t>(j)));
      }
    }
  }
}

template <typename T>
T read_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) value |= static_cast<T>(p[b]) << (8 * b);
  return value;
}

template <typename T>
void write_le(std::string& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((value >> (8 * b)) & 0xFF));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<std::string> read_ids_sidecar(const std::filesystem::path& path, std::size_t n) {
  const auto sidecar = ids_sidecar_path(path);
  std::error_code ec;
  if (!std::filesystem::exists(sidecar, ec)) return {};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(sidecar));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidGradientSet, "malformed id sidecar " + sidecar.string() + ": " + e.what());
  }
  if (!j.is_array() || j.size() != n) {
    throw Error(ErrorCode::InvalidGradientSet,
                "id sidecar " + sidecar.string() + " must be an array of " + std::to_string(n) + " strings");
  }
  std::vector<std::string> ids;
  ids.reserve(n);
  for (const auto& item : j) {
    if (!item.is_string()) throw Error(ErrorCode::InvalidGradientSet, "id sidecar entries must be strings");
    ids.push_back(item.get<std::string>());
  }
  return ids;
}

GradientSet load_binary(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < GradientFileHeader::kSize) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), GradientFileHeader::kMagic, 4) != 0) {
      throw Error(ErrorCode::BadMagic, path.string() + " is not an SPGR file");
    }
    throw Error(ErrorCode::TruncatedPayload, "header shorter than 32 bytes in " + path.string());
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (std::memcmp(p, GradientFileHeader::kMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, path.string() + " is not an SPGR file");
  }
  GradientFileHeader header;
  header.version = read_le<std::uint32_t>(p + 4);
  if (header.version != GradientFileHeader::kVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "SPGR version " + std::to_string(header.version));
  }
  header.n = read_le<std::uint64_t>(p + 8);
  header.d = read_le<std::uint64_t>(p + 16);
  const std::uint8_t dtype = p[24];
  if (dtype > 1) throw Error(ErrorCode::UnsupportedVersion, "unknown dtype tag " + std::to_string(dtype));
  header.dtype = static_cast<DType>(dtype);
  if (header.n == 0 || header.d == 0) {
    throw Error(ErrorCode::InvalidGradientSet, "SPGR file declares an empty matrix");
  }
  const std::size_t width = header.dtype == DType::f64 ? 8 : 4;
  const std::uint64_t count = header.n * header.d;
  if (header.d != 0 && count / header.d != header.n) {
    throw Error(ErrorCode::TruncatedPayload, "header dimensions overflow");
  }
  const std::uint64_t payload = bytes.size() - GradientFileHeader::kSize;
  if (payload != count * width) {
    throw Error(ErrorCode::TruncatedPayload, "payload is " + std::to_string(payload) + " bytes, expected " +
                                                 std::to_string(count * width));
  }

  RowMatrix data(static_cast<Eigen::Index>(header.n), static_cast<Eigen::Index>(header.d));
  const unsigned char* cursor = p + GradientFileHeader::kSize;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      double v;
      if (header.dtype == DType::f64) {
        v = std::bit_cast<double>(read_le<std::uint64_t>(cursor));
      } else {
        v = static_cast<double>(std::bit_cast<float>(read_le<std::uint32_t>(cursor)));
      }
      cursor += width;
      data(i, j) = v;
    }
  }
  check_finite(data);
  return GradientSet(std::move(data), read_ids_sidecar(path, header.n));
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view field, double& value) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  if (field.empty()) return false;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  return ec == std::errc() && ptr == field.data() + field.size();
}

GradientSet load_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const std::size_t nl = rest.find('\n');
      auto line = rest.substr(0, nl);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::RaggedCsv, "empty CSV " + path.string());

  std::size_t first = 0;
  {
    // A first row with any non-numeric cell is a header.
    double dummy;
    for (const auto field : split_fields(lines[0])) {
      if (!parse_double(field, dummy)) {
        first = 1;
        break;
      }
    }
  }
  if (first >= lines.size()) throw Error(ErrorCode::RaggedCsv, "CSV has a header but no data rows");

  const std::size_t d = split_fields(lines[first]).size();
  const std::size_t n = lines.size() - first;
  RowMatrix data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < n; ++r) {
    const auto fields = split_fields(lines[first + r]);
    if (fields.size() != d) {
      throw Error(ErrorCode::RaggedCsv, "row " + std::to_string(r) + " has " + std::to_string(fields.size()) +
                                            " fields, expected " + std::to_string(d));
    }
    for (std::size_t c = 0; c < d; ++c) {
      double v;
      if (!parse_double(fields[c], v)) {
        throw Error(ErrorCode::RaggedCsv, "non-numeric cell at " + position(r, c));
      }
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "non-finite value at " + position(r, c));
      data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return GradientSet(std::move(data), read_ids_sidecar(path, n));
}

void write_ids_sidecar(const GradientSet& gs, const std::filesystem::path& path) {
  const auto sidecar = ids_sidecar_path(path);
  if (gs.has_default_ids()) {
    std::error_code ec;
    std::filesystem::remove(sidecar, ec);
    return;
  }
  std::ofstream ids(sidecar, std::ios::trunc);
  if (!ids) throw Error(ErrorCode::IoError, "cannot write " + sidecar.string());
  ids << nlohmann::json(gs.ids()).dump() << '\n';
}

}  // namespace

GradientSet::GradientSet(RowMatrix data, std::vector<std::string> ids) : data_(std::move(data)), ids_(std::move(ids)) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw Error(ErrorCode::InvalidGradientSet, "gradient set needs n >= 1 and d >= 1");
  }
  check_finite(data_);
  if (ids_.empty()) {
    ids_.reserve(n());
    for (std::size_t i = 0; i < n(); ++i) ids_.push_back(std::to_string(i));
  } else if (ids_.size() != n()) {
    throw Error(ErrorCode::InvalidGradientSet,
                "got " + std::to_string(ids_.size()) + " ids for " + std::to_string(n()) + " samples");
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) throw Error(ErrorCode::InvalidGradientSet, "duplicate sample id '" + id + "'");
  }
}

bool GradientSet::has_default_ids() const noexcept {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] != std::to_string(i)) return false;
  }
  return true;
}

RowMatrix GradientSet::gather(const std::vector<std::size_t>& indices) const {
  RowMatrix out(static_cast<Eigen::Index>(indices.size()), data_.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = data_.row(static_cast<Eigen::Index>(indices[r]));
  }
  return out;
}

std::filesystem::path ids_sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".ids.json");
}

GradientSet load_gradients(const std::filesystem::path& path, FileFormat format) {
  return format == FileFormat::binary ? load_binary(path) : load_csv(path);
}

void save_gradients(const GradientSet& gs, const std::filesystem::path& path, DType dtype) {
  std::string out;
  const std::size_t width = dtype == DType::f64 ? 8 : 4;
  out.reserve(GradientFileHeader::kSize + gs.n() * gs.d() * width);
  out.append(GradientFileHeader::kMagic, 4);
  write_le<std::uint32_t>(out, GradientFileHeader::kVersion);
  write_le<std::uint64_t>(out, gs.n());
  write_le<std::uint64_t>(out, gs.d());
  out.push_back(static_cast<char>(dtype));
  out.append(7, '\0');
  const auto& data = gs.data();
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (dtype == DType::f64) {
        write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(data(i, j)));
      } else {
        write_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(data(i, j))));
      }
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error(ErrorCode::IoError, "short write to " + path.string());

  write_ids_sidecar(gs, path);
}

void save_gradients_csv(const GradientSet& gs, const std::filesystem::path& path) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const auto& data = gs.data();
  std::array<char, 32> buf{};
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (j) file << ',';
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), data(i, j));
      file.write(buf.data(), res.ptr - buf.data());
    }
    file << '\n';
  }
  if (!file) throw Error(ErrorCode::IoError, "short write to " + path.string());
  write_ids_sidecar(gs, path);
}

GradientNorms gradient_norms(const GradientSet& gs) {
  GradientNorms out;
  out.norms.resize(gs.n());
  for (std::size_t i = 0; i < gs.n(); ++i) {
    out.norms[i] = gs.row(i).norm();
    out.g_max = std::max(out.g_max, out.norms[i]);
  }
  return out;
}

}  // namespace spice
