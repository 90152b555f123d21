#ifndef HBGNN_CHECKPOINT_HPP_
#define HBGNN_CHECKPOINT_HPP_

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "hbgnn/data.hpp"
#include "hbgnn/error.hpp"
#include "hbgnn/model.hpp"
#include "hbgnn/optim.hpp"

namespace hbgnn {

/// Serialized model: a text header (format version, configuration,
/// vocabularies as token lists) followed by named tensor blocks of
/// little-endian 32-bit reals, closed by a whole-file CRC-32 line. The
/// payload precision is fixed by the format, so round trips are bit-exact
/// for the single-precision pipeline that produces checkpoints.
struct Checkpoint {
  static constexpr int kVersion = 1;

  ModelConfig config;
  Vocabularies vocabs;
  ParameterSet<float> params;
  std::optional<AmsgradState<float>> optimizer;
};

namespace detail {

inline std::uint32_t crc32(const char* data, std::size_t n) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) {
    crc = table[(crc ^ std::uint8_t(data[i])) & 0xFFu] ^ (crc >> 8);
  }
  return crc ^ 0xFFFFFFFFu;
}

inline void append_f32_le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  out.push_back(char(bits & 0xFF));
  out.push_back(char((bits >> 8) & 0xFF));
  out.push_back(char((bits >> 16) & 0xFF));
  out.push_back(char((bits >> 24) & 0xFF));
}

inline float read_f32_le(const char* p) {
  const std::uint32_t bits = std::uint32_t(std::uint8_t(p[0])) |
                             (std::uint32_t(std::uint8_t(p[1])) << 8) |
                             (std::uint32_t(std::uint8_t(p[2])) << 16) |
                             (std::uint32_t(std::uint8_t(p[3])) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Sequential cursor over the in-memory file image.
class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& buf) : buf_(buf) {}

  std::string line() {
    const std::size_t end = buf_.find('\n', pos_);
    if (end == std::string::npos) throw FormatError("checkpoint truncated: missing line end");
    std::string out = buf_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }

  /// Line of the form "<key> <rest>"; the key must match exactly.
  std::string keyed_line(const std::string& key) {
    std::string l = line();
    if (l.rfind(key + " ", 0) != 0) {
      throw FormatError("checkpoint: expected '" + key + " ...', got '" + l + "'");
    }
    return l.substr(key.size() + 1);
  }

  const char* bytes(std::size_t n) {
    if (pos_ + n > buf_.size()) throw FormatError("checkpoint truncated: binary block cut short");
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::string& buf_;
  std::size_t pos_ = 0;
};

inline long long to_int(const std::string& s, const char* what) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError("checkpoint: bad " + std::string(what) + " '" + s + "'");
  }
  return v;
}

inline double to_double(const std::string& s, const char* what) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw FormatError("checkpoint: bad " + std::string(what) + " '" + s + "'");
  }
}

inline void append_tensor_block(std::string& out, const std::string& header,
                                const std::string& name, const Tensor<float>& t) {
  out += header + " " + name + " " + std::to_string(t.shape.size());
  for (std::size_t d : t.shape) out += " " + std::to_string(d);
  out += "\n";
  for (float v : t.data) append_f32_le(out, v);
  out += "\n";
}

inline Tensor<float> read_tensor_block(CheckpointReader& r, const std::string& header,
                                       std::string* name_out) {
  const std::string rest = r.keyed_line(header);
  auto fields = split(rest, ' ');
  if (fields.size() < 2) throw FormatError("checkpoint: malformed tensor header '" + rest + "'");
  *name_out = fields[0];
  const std::size_t rank = std::size_t(to_int(fields[1], "tensor rank"));
  if (fields.size() != 2 + rank) {
    throw FormatError("checkpoint: tensor '" + *name_out + "' header lists wrong extent count");
  }
  std::vector<std::size_t> shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    shape.push_back(std::size_t(to_int(fields[2 + i], "tensor extent")));
    count *= shape.back();
  }
  const char* p = r.bytes(count * 4);
  Tensor<float> t(shape);
  for (std::size_t i = 0; i < count; ++i) t.data[i] = read_f32_le(p + i * 4);
  if (r.bytes(1)[0] != '\n') throw FormatError("checkpoint: tensor block missing terminator");
  return t;
}

inline void append_vocab(std::string& out, const Vocabulary& v) {
  out += "vocab " + v.feature() + " " + std::to_string(v.size()) + "\n";
  for (const auto& t : v.tokens()) out += t + "\n";
}

inline Vocabulary read_vocab(CheckpointReader& r, const std::string& feature) {
  auto fields = split(r.keyed_line("vocab"), ' ');
  if (fields.size() != 2 || fields[0] != feature) {
    throw FormatError("checkpoint: expected vocabulary '" + feature + "'");
  }
  const std::size_t n = std::size_t(to_int(fields[1], "vocabulary size"));
  std::vector<std::string> tokens;
  tokens.reserve(n);
  for (std::size_t i = 0; i < n; ++i) tokens.push_back(r.line());
  return Vocabulary(feature, std::move(tokens));
}

inline std::string join_widths(const std::vector<std::size_t>& widths) {
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    out += (i ? "," : "") + std::to_string(widths[i]);
  }
  return out;
}

inline std::vector<std::size_t> parse_widths(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& part : split(s, ',')) {
    out.push_back(std::size_t(to_int(part, "mlp width")));
  }
  return out;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out += "HBGNN-CHECKPOINT " + std::to_string(Checkpoint::kVersion) + "\n";
  out += "config.variant " + std::string(variant_name(ckpt.config.variant)) + "\n";
  out += "config.attention " + std::to_string(int(ckpt.config.attention)) + "\n";
  out += "config.baseline " + std::to_string(int(ckpt.config.baseline)) + "\n";
  out += "config.link_dim " + std::to_string(ckpt.config.link_dim) + "\n";
  out += "config.place_dim " + std::to_string(ckpt.config.place_dim) + "\n";
  out += "config.encoder_hidden " + std::to_string(ckpt.config.encoder_hidden) + "\n";
  out += "config.mlp_widths " + detail::join_widths(ckpt.config.mlp_widths) + "\n";
  out += "config.rounds_link " + std::to_string(ckpt.config.rounds_link) + "\n";
  out += "config.rounds_place " + std::to_string(ckpt.config.rounds_place) + "\n";
  out += "config.seed " + std::to_string(ckpt.config.seed) + "\n";

  detail::append_vocab(out, ckpt.vocabs.user_id);
  detail::append_vocab(out, ckpt.vocabs.movie_id);
  detail::append_vocab(out, ckpt.vocabs.occupation);
  detail::append_vocab(out, ckpt.vocabs.zip);
  detail::append_vocab(out, ckpt.vocabs.gender);
  detail::append_vocab(out, ckpt.vocabs.genre);

  out += "tensors " + std::to_string(ckpt.params.size()) + "\n";
  for (const auto& [name, tensor] : ckpt.params.items()) {
    detail::append_tensor_block(out, "tensor", name, tensor);
  }

  if (ckpt.optimizer.has_value()) {
    const auto& opt = *ckpt.optimizer;
    out += "optimizer 1\n";
    out += "optimizer.step " + std::to_string(opt.step_count()) + "\n";
    out += "optimizer.lr " + detail::format_double(opt.config().lr) + "\n";
    out += "optimizer.beta1 " + detail::format_double(opt.config().beta1) + "\n";
    out += "optimizer.beta2 " + detail::format_double(opt.config().beta2) + "\n";
    out += "optimizer.eps " + detail::format_double(opt.config().eps) + "\n";
    out += "optimizer.weight_decay " + detail::format_double(opt.config().weight_decay) + "\n";
    for (const auto& slot : opt.slots()) {
      detail::append_tensor_block(out, "moment", slot.name + ".m", slot.m);
      detail::append_tensor_block(out, "moment", slot.name + ".v", slot.v);
      detail::append_tensor_block(out, "moment", slot.name + ".v_max", slot.v_max);
    }
  } else {
    out += "optimizer 0\n";
  }

  char crc_buf[16];
  std::snprintf(crc_buf, sizeof(crc_buf), "%08X", detail::crc32(out.data(), out.size()));
  out += "checksum crc32 " + std::string(crc_buf) + "\n";
  return out;
}

inline Checkpoint parse_checkpoint(const std::string& buf) {
  // The checksum line is the trailing 24 bytes: "checksum crc32 XXXXXXXX\n".
  static const std::string kChecksumPrefix = "checksum crc32 ";
  const std::size_t tail = kChecksumPrefix.size() + 8 + 1;
  if (buf.size() < tail) throw FormatError("checkpoint truncated: no checksum");
  const std::size_t body = buf.size() - tail;
  if (buf.compare(body, kChecksumPrefix.size(), kChecksumPrefix) != 0 || buf.back() != '\n') {
    throw FormatError("checkpoint truncated: checksum line malformed");
  }
  const std::string stated = buf.substr(body + kChecksumPrefix.size(), 8);
  char crc_buf[16];
  std::snprintf(crc_buf, sizeof(crc_buf), "%08X", detail::crc32(buf.data(), body));
  if (stated != crc_buf) {
    throw FormatError("checkpoint integrity: checksum mismatch (stated " + stated + ", computed " +
                      std::string(crc_buf) + ")");
  }

  detail::CheckpointReader r(buf);
  const std::string magic = r.line();
  if (magic != "HBGNN-CHECKPOINT " + std::to_string(Checkpoint::kVersion)) {
    throw FormatError("checkpoint format version mismatch: '" + magic + "'");
  }

  Checkpoint ckpt;
  ckpt.config.variant = variant_from_name(r.keyed_line("config.variant"));
  ckpt.config.attention = detail::to_int(r.keyed_line("config.attention"), "attention flag") != 0;
  ckpt.config.baseline = detail::to_int(r.keyed_line("config.baseline"), "baseline flag") != 0;
  ckpt.config.link_dim = std::size_t(detail::to_int(r.keyed_line("config.link_dim"), "link_dim"));
  ckpt.config.place_dim = std::size_t(detail::to_int(r.keyed_line("config.place_dim"), "place_dim"));
  ckpt.config.encoder_hidden =
      std::size_t(detail::to_int(r.keyed_line("config.encoder_hidden"), "encoder_hidden"));
  ckpt.config.mlp_widths = detail::parse_widths(r.keyed_line("config.mlp_widths"));
  ckpt.config.rounds_link =
      std::size_t(detail::to_int(r.keyed_line("config.rounds_link"), "rounds_link"));
  ckpt.config.rounds_place =
      std::size_t(detail::to_int(r.keyed_line("config.rounds_place"), "rounds_place"));
  ckpt.config.seed = std::uint64_t(detail::to_int(r.keyed_line("config.seed"), "seed"));

  ckpt.vocabs.user_id = detail::read_vocab(r, "user_id");
  ckpt.vocabs.movie_id = detail::read_vocab(r, "movie_id");
  ckpt.vocabs.occupation = detail::read_vocab(r, "occupation");
  ckpt.vocabs.zip = detail::read_vocab(r, "zip");
  ckpt.vocabs.gender = detail::read_vocab(r, "gender");
  ckpt.vocabs.genre = detail::read_vocab(r, "genre");

  const std::size_t n_tensors = std::size_t(detail::to_int(r.keyed_line("tensors"), "tensor count"));
  for (std::size_t i = 0; i < n_tensors; ++i) {
    std::string name;
    Tensor<float> t = detail::read_tensor_block(r, "tensor", &name);
    ckpt.params.add(name, std::move(t));
  }

  const long long has_opt = detail::to_int(r.keyed_line("optimizer"), "optimizer flag");
  if (has_opt == 1) {
    const std::uint64_t step =
        std::uint64_t(detail::to_int(r.keyed_line("optimizer.step"), "optimizer step"));
    AmsgradConfig cfg;
    cfg.lr = detail::to_double(r.keyed_line("optimizer.lr"), "lr");
    cfg.beta1 = detail::to_double(r.keyed_line("optimizer.beta1"), "beta1");
    cfg.beta2 = detail::to_double(r.keyed_line("optimizer.beta2"), "beta2");
    cfg.eps = detail::to_double(r.keyed_line("optimizer.eps"), "eps");
    cfg.weight_decay = detail::to_double(r.keyed_line("optimizer.weight_decay"), "weight_decay");
    ckpt.optimizer.emplace(ckpt.params, cfg);
    ckpt.optimizer->set_step_count(step);
    for (auto& slot : ckpt.optimizer->slots()) {
      for (auto* dst : {&slot.m, &slot.v, &slot.v_max}) {
        std::string name;
        Tensor<float> t = detail::read_tensor_block(r, "moment", &name);
        if (!t.same_shape(*dst)) {
          throw FormatError("checkpoint: optimizer moment '" + name + "' has the wrong shape");
        }
        *dst = std::move(t);
      }
    }
  } else if (has_opt != 0) {
    throw FormatError("checkpoint: bad optimizer flag");
  }
  return ckpt;
}

/// Write atomically: serialize to <path>.tmp, rename on success, so no
/// partial checkpoint file can exist under the target name.
inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string body = serialize_checkpoint(ckpt);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(body.data(), std::streamsize(body.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move checkpoint into place at " + path.string());
  }
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(buf);
}

inline Checkpoint to_checkpoint(const Model<float>& model,
                                std::optional<AmsgradState<float>> optimizer = std::nullopt) {
  return Checkpoint{model.config, model.vocabs, model.params, std::move(optimizer)};
}

inline Model<float> to_model(const Checkpoint& ckpt) {
  return Model<float>{ckpt.config, ckpt.vocabs, ckpt.params};
}

}  // namespace hbgnn

#endif  // HBGNN_CHECKPOINT_HPP_
