#include "hetmarket/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "hetmarket/config.hpp"

namespace hetmarket {

namespace {

constexpr std::array<char, 8> kMagic = {'H', 'M', 'K', 'T', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u32(std::uint32_t v) { bytes(v, 4); }
  void u64(std::uint64_t v) { bytes(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

 private:
  void bytes(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(bytes(4)); }
  std::uint64_t u64() { return bytes(8); }
  double f64() { return std::bit_cast<double>(u64()); }

 private:
  std::uint64_t bytes(int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      const int c = in_.get();
      if (c == std::char_traits<char>::eof()) throw CheckpointError("checkpoint is truncated");
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
  }
  std::istream& in_;
};

void write_shapes(Writer& w, const Mlp& net) {
  w.u32(static_cast<std::uint32_t>(net.layers().size()));
  for (const DenseLayer& l : net.layers()) {
    w.u32(static_cast<std::uint32_t>(l.weight.rows()));
    w.u32(static_cast<std::uint32_t>(l.weight.cols()));
  }
}

std::vector<int> read_sizes(Reader& r, const char* what) {
  const std::uint32_t layers = r.u32();
  if (layers == 0 || layers > 64)
    throw CheckpointError(std::string("implausible layer count in ") + what);
  std::vector<int> sizes;
  for (std::uint32_t k = 0; k < layers; ++k) {
    const std::uint32_t rows = r.u32(), cols = r.u32();
    if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
      throw CheckpointError(std::string("implausible layer shape in ") + what);
    if (k == 0) sizes.push_back(static_cast<int>(cols));
    if (static_cast<int>(cols) != sizes.back())
      throw CheckpointError(std::string("inconsistent layer shapes in ") + what);
    sizes.push_back(static_cast<int>(rows));
  }
  return sizes;
}

void write_values(Writer& w, const Mlp& net) {
  std::vector<double> v(net.parameter_count());
  net.write_parameters(v.data());
  for (double x : v) w.f64(x);
}

void read_values(Reader& r, Mlp& net) {
  std::vector<double> v(net.parameter_count());
  for (double& x : v) x = r.f64();
  net.read_parameters(v.data());
}

}  // namespace

void write_checkpoint(std::ostream& out, const PolicyParams& params,
                      const ObservationNormalizer& normalizer, std::uint64_t config_hash) {
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  w.u64(config_hash);
  w.u32(static_cast<std::uint32_t>(params.hidden_width));
  write_shapes(w, params.actor);
  write_shapes(w, params.critic);
  w.u32(static_cast<std::uint32_t>(params.log_std.size()));
  write_values(w, params.actor);
  for (Eigen::Index k = 0; k < params.log_std.size(); ++k) w.f64(params.log_std[k]);
  write_values(w, params.critic);
  w.f64(normalizer.count());
  w.u32(static_cast<std::uint32_t>(normalizer.mean().size()));
  for (Eigen::Index k = 0; k < normalizer.mean().size(); ++k) w.f64(normalizer.mean()[k]);
  for (Eigen::Index k = 0; k < normalizer.var().size(); ++k) w.f64(normalizer.var()[k]);
  if (!out) throw CheckpointError("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kMagic)
    throw CheckpointError("not a checkpoint file (bad magic)");
  Reader r(in);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.config_hash = r.u64();
  ck.params.hidden_width = static_cast<int>(r.u32());
  ck.params.actor = Mlp(read_sizes(r, "actor"));
  ck.params.critic = Mlp(read_sizes(r, "critic"));
  const std::uint32_t log_std_size = r.u32();
  if (log_std_size != static_cast<std::uint32_t>(ck.params.actor.output_size()))
    throw CheckpointError("log-std size does not match the actor output");
  read_values(r, ck.params.actor);
  ck.params.log_std.resize(log_std_size);
  for (std::uint32_t k = 0; k < log_std_size; ++k) ck.params.log_std[k] = r.f64();
  read_values(r, ck.params.critic);
  const double count = r.f64();
  const std::uint32_t dim = r.u32();
  if (dim != kObservationSize) throw CheckpointError("normalizer dimension mismatch");
  Eigen::VectorXd mean(dim), var(dim);
  for (std::uint32_t k = 0; k < dim; ++k) mean[k] = r.f64();
  for (std::uint32_t k = 0; k < dim; ++k) var[k] = r.f64();
  ck.normalizer.set_state(count, mean, var);
  if (in.peek() != std::char_traits<char>::eof())
    throw CheckpointError("trailing bytes after checkpoint payload");
  return ck;
}

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const ObservationNormalizer& normalizer, std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  write_checkpoint(out, params, normalizer, config_hash);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  try {
    return read_checkpoint(in);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

void check_compatible(const Checkpoint& ck, const ExperimentConfig& config) {
  const int h = config.learning.hidden_width;
  const auto& p = ck.params;
  auto shape_ok = [h](const Mlp& net, int out) {
    const auto& ls = net.layers();
    return ls.size() == 3 && net.input_size() == static_cast<int>(kObservationSize) &&
           ls[0].weight.rows() == h && ls[1].weight.rows() == h && ls[1].weight.cols() == h &&
           net.output_size() == out;
  };
  if (p.hidden_width != h || !shape_ok(p.actor, kActionSize) || !shape_ok(p.critic, 1))
    throw CheckpointError("checkpoint network (hidden width " + std::to_string(p.hidden_width) +
                          ") does not match config hidden_width " + std::to_string(h));
}

}  // namespace hetmarket
