#pragma once

// Checkpoint file:
//   8 bytes   magic "MLTCCKPT"
//   u32 LE    format version (1)
//   u64 LE    header length n
//   n bytes   JSON header: {"config": ModelConfig, "tensors": [{"name","rows","cols"}...],
//                           "optimizer_step": u64 | null, "meta": {...}}
//   payload   row-major little-endian float64 data for each tensor in header order;
//             when optimizer_step is set, first then second moments follow in the same order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mltc/error.hpp"
#include "mltc/model/params.hpp"
#include "mltc/train/optimizer.hpp"

namespace mltc {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'M', 'L', 'T', 'C', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Parameters params;
  std::optional<OptimizerState> optimizer;
  nlohmann::json meta = nlohmann::json::object();
};

namespace detail {

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InputError("checkpoint truncated");
  return v;
}

inline void write_tensors(std::ostream& out, const Parameters& p) {
  p.visit([&](const std::string&, const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) write_le<double>(out, m(r, c));
  });
}

inline void read_tensors(std::istream& in, Parameters& p) {
  p.visit([&](const std::string&, Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_le<double>(in);
  });
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = ck.params.config;
  header["tensors"] = nlohmann::json::array();
  ck.params.visit([&](const std::string& name, const Matrix& m) {
    header["tensors"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  header["optimizer_step"] = ck.optimizer ? nlohmann::json(ck.optimizer->step) : nlohmann::json(nullptr);
  header["meta"] = ck.meta;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint '" + path.string() + "'");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_le<std::uint32_t>(out, kCheckpointVersion);
  detail::write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  detail::write_tensors(out, ck.params);
  if (ck.optimizer) {
    detail::write_tensors(out, ck.optimizer->first_moment);
    detail::write_tensors(out, ck.optimizer->second_moment);
  }
  if (!out) throw InputError("failed writing checkpoint '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw InputError("'" + path.string() + "' is not a checkpoint file");
  if (detail::read_le<std::uint32_t>(in) != kCheckpointVersion) throw InputError("unsupported checkpoint version");
  const auto len = detail::read_le<std::uint64_t>(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw InputError("checkpoint header truncated");
  const auto header = nlohmann::json::parse(text);

  Checkpoint ck;
  ck.params = init_params(header.at("config").get<ModelConfig>(), 0);
  std::size_t i = 0;
  const auto& tensors = header.at("tensors");
  ck.params.visit([&](const std::string& name, const Matrix& m) {
    if (i >= tensors.size() || tensors[i].at("name") != name || tensors[i].at("rows") != m.rows() ||
        tensors[i].at("cols") != m.cols())
      throw InputError("checkpoint tensor table does not match its config at '" + name + "'");
    ++i;
  });
  if (i != tensors.size()) throw InputError("checkpoint has extra tensors");
  detail::read_tensors(in, ck.params);
  if (!header.at("optimizer_step").is_null()) {
    OptimizerState s = init_optimizer_state(ck.params);
    s.step = header.at("optimizer_step").get<std::uint64_t>();
    detail::read_tensors(in, s.first_moment);
    detail::read_tensors(in, s.second_moment);
    ck.optimizer = std::move(s);
  }
  ck.meta = header.value("meta", nlohmann::json::object());
  return ck;
}

}  // namespace mltc
