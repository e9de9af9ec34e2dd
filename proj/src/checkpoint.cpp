#include "aeromatch/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace aeromatch {

namespace {

void put_bytes(std::vector<unsigned char>& out, const void* p, size_t n) {
  const auto* b = static_cast<const unsigned char*>(p);
  out.insert(out.end(), b, b + n);
}

template <typename T>
void put_le(std::vector<unsigned char>& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(buf, buf + sizeof(T));
  put_bytes(out, buf, sizeof(T));
}

void put_f64_le(std::vector<unsigned char>& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_le(out, bits);
}

class Reader {
 public:
  Reader(std::vector<unsigned char> bytes, std::string name)
      : bytes_(std::move(bytes)), name_(std::move(name)) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  double get_f64_le() {
    const uint64_t bits = get_le<uint64_t>();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::string get_string(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::vector<unsigned char> get_blob(size_t n) {
    need(n);
    std::vector<unsigned char> b(bytes_.begin() + static_cast<long>(pos_),
                                 bytes_.begin() + static_cast<long>(pos_ + n));
    pos_ += n;
    return b;
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) {
    if (pos_ + n > bytes_.size())
      throw FormatViolation("checkpoint '" + name_ + "': truncated file");
  }
  std::vector<unsigned char> bytes_;
  std::string name_;
  size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  std::vector<unsigned char> out;
  put_bytes(out, "AEMN", 4);
  put_le<uint32_t>(out, kCheckpointVersion);
  put_le<uint32_t>(out, static_cast<uint32_t>(data.tensors.size()));
  for (const auto& [name, t] : data.tensors) {
    if (name.size() > 0xffff) throw Error("save_checkpoint: name too long");
    put_le<uint16_t>(out, static_cast<uint16_t>(name.size()));
    put_bytes(out, name.data(), name.size());
    const Shape& s = t.shape();
    if (s.size() > 0xff) throw Error("save_checkpoint: rank too high");
    put_le<uint8_t>(out, static_cast<uint8_t>(s.size()));
    for (int e : s) put_le<uint32_t>(out, static_cast<uint32_t>(e));
    for (int64_t i = 0; i < t.size(); ++i) put_f64_le(out, t.data()[i]);
  }
  put_le<uint32_t>(out, static_cast<uint32_t>(data.blobs.size()));
  for (const auto& [name, bytes] : data.blobs) {
    put_le<uint16_t>(out, static_cast<uint16_t>(name.size()));
    put_bytes(out, name.data(), name.size());
    put_le<uint64_t>(out, bytes.size());
    put_bytes(out, bytes.data(), bytes.size());
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to '" + path.string() + "'");
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path.string());

  if (r.get_string(4) != "AEMN")
    throw FormatViolation("checkpoint '" + path.string() + "': bad magic");
  const uint32_t version = r.get_le<uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatViolation("checkpoint '" + path.string() + "': version " +
                          std::to_string(version) + ", this build reads version " +
                          std::to_string(kCheckpointVersion));

  CheckpointData data;
  const uint32_t tensor_count = r.get_le<uint32_t>();
  for (uint32_t i = 0; i < tensor_count; ++i) {
    const auto name_len = r.get_le<uint16_t>();
    std::string name = r.get_string(name_len);
    const auto ndim = r.get_le<uint8_t>();
    Shape shape;
    for (uint8_t d = 0; d < ndim; ++d) {
      const auto e = r.get_le<uint32_t>();
      if (e == 0 || e > (1u << 28))
        throw FormatViolation("checkpoint '" + path.string() + "': bad extent");
      shape.push_back(static_cast<int>(e));
    }
    const int64_t n = shape_numel(shape);
    std::vector<double> values(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) values[static_cast<size_t>(j)] = r.get_f64_le();
    data.tensors.emplace_back(std::move(name),
                              Tensor::from(std::move(shape), std::move(values)));
  }
  const uint32_t blob_count = r.get_le<uint32_t>();
  for (uint32_t i = 0; i < blob_count; ++i) {
    const auto name_len = r.get_le<uint16_t>();
    std::string name = r.get_string(name_len);
    const auto size = r.get_le<uint64_t>();
    data.blobs.emplace_back(std::move(name), r.get_blob(size));
  }
  if (!r.exhausted())
    throw FormatViolation("checkpoint '" + path.string() + "': trailing bytes");
  return data;
}

namespace {

Tensor find_tensor(const CheckpointData& data, const std::string& name,
                   const std::string& path) {
  for (const auto& [k, t] : data.tensors)
    if (k == name) return t;
  throw FormatViolation("checkpoint '" + path + "': missing tensor '" + name + "'");
}

bool has_tensor(const CheckpointData& data, const std::string& name) {
  for (const auto& [k, t] : data.tensors)
    if (k == name) return true;
  return false;
}

}  // namespace

void save_model(const std::filesystem::path& path, const ModelCheckpoint& ckpt) {
  CheckpointData data;
  const BackboneConfig& c = ckpt.config;
  data.tensors.emplace_back(
      "meta.config",
      Tensor::from({7}, {static_cast<double>(c.input_size),
                         static_cast<double>(c.widths[0]),
                         static_cast<double>(c.widths[1]),
                         static_cast<double>(c.widths[2]),
                         static_cast<double>(c.se_reduction),
                         static_cast<double>(c.reg_conv1_channels),
                         static_cast<double>(c.reg_conv2_channels)}));
  data.tensors.emplace_back("meta.step",
                            Tensor::from({1}, {static_cast<double>(ckpt.step)}));
  for (const auto& [name, t] : ckpt.weights.tensors)
    data.tensors.emplace_back("weights." + name, t);
  if (ckpt.adam) {
    const AdamState& a = *ckpt.adam;
    data.tensors.emplace_back(
        "adam.meta", Tensor::from({5}, {static_cast<double>(a.t), a.config.lr,
                                        a.config.beta1, a.config.beta2,
                                        a.config.eps}));
    for (size_t i = 0; i < a.m.size(); ++i) {
      const auto& name = ckpt.weights.tensors.at(i).first;
      data.tensors.emplace_back(
          "adam.m." + name,
          Tensor::from({static_cast<int>(a.m[i].size())}, a.m[i]));
      data.tensors.emplace_back(
          "adam.v." + name,
          Tensor::from({static_cast<int>(a.v[i].size())}, a.v[i]));
    }
  }
  if (!ckpt.rng_state.empty()) {
    std::vector<unsigned char> blob(ckpt.rng_state.begin(), ckpt.rng_state.end());
    data.blobs.emplace_back("rng.train", std::move(blob));
  }
  save_checkpoint(path, data);
}

ModelCheckpoint load_model(const std::filesystem::path& path) {
  const CheckpointData data = load_checkpoint(path);
  const std::string p = path.string();
  ModelCheckpoint ckpt;

  const Tensor cfg = find_tensor(data, "meta.config", p);
  if (cfg.size() != 7)
    throw FormatViolation("checkpoint '" + p + "': bad meta.config");
  ckpt.config.input_size = static_cast<int>(cfg.data()[0]);
  ckpt.config.widths = {static_cast<int>(cfg.data()[1]),
                        static_cast<int>(cfg.data()[2]),
                        static_cast<int>(cfg.data()[3])};
  ckpt.config.se_reduction = static_cast<int>(cfg.data()[4]);
  ckpt.config.reg_conv1_channels = static_cast<int>(cfg.data()[5]);
  ckpt.config.reg_conv2_channels = static_cast<int>(cfg.data()[6]);
  ckpt.config.validate();
  ckpt.step = static_cast<long>(find_tensor(data, "meta.step", p).item());

  // Weight layout comes from the config; the checkpoint must match it.
  ModelWeights expected = init_weights(ckpt.config, 0);
  for (auto& [name, t] : expected.tensors) {
    Tensor stored = find_tensor(data, "weights." + name, p);
    if (stored.shape() != t.shape())
      throw FormatViolation("checkpoint '" + p + "': tensor 'weights." + name +
                            "' has shape " + shape_str(stored.shape()) +
                            ", expected " + shape_str(t.shape()));
    std::memcpy(t.data(), stored.data(),
                sizeof(double) * static_cast<size_t>(t.size()));
  }
  ckpt.weights = std::move(expected);

  if (has_tensor(data, "adam.meta")) {
    const Tensor meta = find_tensor(data, "adam.meta", p);
    if (meta.size() != 5)
      throw FormatViolation("checkpoint '" + p + "': bad adam.meta");
    AdamConfig ac;
    ac.lr = meta.data()[1];
    ac.beta1 = meta.data()[2];
    ac.beta2 = meta.data()[3];
    ac.eps = meta.data()[4];
    const auto params = ckpt.weights.params();
    AdamState st = AdamState::init(params, ac);
    st.t = static_cast<long>(meta.data()[0]);
    for (size_t i = 0; i < ckpt.weights.tensors.size(); ++i) {
      const auto& name = ckpt.weights.tensors[i].first;
      const Tensor m = find_tensor(data, "adam.m." + name, p);
      const Tensor v = find_tensor(data, "adam.v." + name, p);
      if (m.size() != static_cast<int64_t>(st.m[i].size()) ||
          v.size() != static_cast<int64_t>(st.v[i].size()))
        throw FormatViolation("checkpoint '" + p + "': adam moments for '" + name +
                              "' have the wrong size");
      std::memcpy(st.m[i].data(), m.data(), sizeof(double) * st.m[i].size());
      std::memcpy(st.v[i].data(), v.data(), sizeof(double) * st.v[i].size());
    }
    ckpt.adam = std::move(st);
  }
  for (const auto& [name, blob] : data.blobs)
    if (name == "rng.train") ckpt.rng_state.assign(blob.begin(), blob.end());
  return ckpt;
}

}  // namespace aeromatch
