// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "dsce/rnn.hpp"

namespace dsce::rnn {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

namespace {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw RuntimeError("model file truncated");
  return v;
}

}  // namespace

void write_model(const NetworkModel& m, std::ostream& out) {
  m.validate();
  out.write(kModelMagic, sizeof kModelMagic);
  put<std::uint32_t>(out, kModelVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.forward.kind));
  put<std::uint32_t>(out, m.bidirectional() ? 1u : 0u);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.readout.activation));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.input_dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.hidden_dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.out_dim()));
  put<std::uint64_t>(out, parameter_count(m));
  const RVector theta = flatten(m);
  out.write(reinterpret_cast<const char*>(theta.data()), static_cast<std::streamsize>(theta.size() * sizeof(double)));
  if (!out) throw RuntimeError("failed writing model");
}

NetworkModel read_model(std::istream& in) {
  char magic[sizeof kModelMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kModelMagic, sizeof magic) != 0)
    throw RuntimeError("not a model file (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kModelVersion) throw RuntimeError("unsupported model version " + std::to_string(version));
  const auto kind = get<std::uint32_t>(in);
  const auto bidir = get<std::uint32_t>(in);
  const auto act = get<std::uint32_t>(in);
  const auto in_dim = get<std::uint32_t>(in);
  const auto hidden = get<std::uint32_t>(in);
  const auto out_dim = get<std::uint32_t>(in);
  const auto count = get<std::uint64_t>(in);
  if (kind > 2 || bidir > 1 || act > 1) throw RuntimeError("model header has invalid enum values");
  if (in_dim == 0 || hidden == 0 || out_dim == 0 || in_dim > (1u << 24) || hidden > (1u << 16) || out_dim > (1u << 24))
    throw RuntimeError("model header has invalid dimensions");

  Architecture arch{static_cast<CellKind>(kind), static_cast<int>(in_dim), static_cast<int>(hidden),
                    static_cast<int>(out_dim), bidir == 1, static_cast<Activation>(act)};
  NetworkModel m = init_model(arch, 0);
  if (count != parameter_count(m)) throw RuntimeError("model parameter count does not match its header");
  RVector theta(static_cast<Eigen::Index>(count));
  if (!in.read(reinterpret_cast<char*>(theta.data()), static_cast<std::streamsize>(count * sizeof(double))))
    throw RuntimeError("model file truncated");
  unflatten(m, theta);
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw RuntimeError(std::string("corrupt model: ") + e.what());
  }
  return m;
}

void save_model(const NetworkModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot open " + path.string() + " for writing");
  write_model(m, out);
}

NetworkModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open " + path.string());
  return read_model(in);
}

}  // namespace dsce::rnn
