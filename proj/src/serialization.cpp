#include "et2q/serialization.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

namespace et2q {

namespace {

using Tag = std::array<char, 4>;

constexpr Tag tag_of(std::string_view s) { return {s[0], s[1], s[2], s[3]}; }

constexpr Tag kClassifierTag = tag_of("CLSF");
constexpr Tag kModelTag = tag_of("MODL");
constexpr Tag kHyperTag = tag_of("HYPR");
constexpr Tag kDimsTag = tag_of("DIMS");
constexpr Tag kNormTag = tag_of("NORM");
constexpr Tag kPendingTag = tag_of("PEND");
constexpr Tag kNetworkTag = tag_of("NETW");
constexpr Tag kFilterTag = tag_of("DEKF");
constexpr Tag kDensityTag = tag_of("DENS");
constexpr Tag kStepTag = tag_of("STEP");

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void i32(std::int32_t v) { put_le(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { put_le(static_cast<std::uint64_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  void vec(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }

  template <typename Matrix>
  void mat(const Matrix& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }

  void section(const Tag& tag, const Writer& body) {
    buf_.insert(buf_.end(), tag.begin(), tag.end());
    u64(body.buf_.size());
    buf_.insert(buf_.end(), body.buf_.begin(), body.buf_.end());
  }

  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  template <typename T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }

  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() { return get_le<std::uint16_t>(); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(get_le<std::uint32_t>()); }
  std::int64_t i64() { return static_cast<std::int64_t>(get_le<std::uint64_t>()); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }

  std::uint64_t count(std::size_t element_bytes) {
    const std::uint64_t n = u64();
    if (element_bytes > 0 && n > remaining() / element_bytes) {
      throw FormatError("corrupt payload: element count exceeds remaining bytes");
    }
    return n;
  }

  Eigen::VectorXd vec() {
    const auto n = count(8);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f64();
    return v;
  }

  template <typename Matrix>
  Matrix mat() {
    const std::uint64_t rows = u64();
    const std::uint64_t cols = u64();
    if (cols != 0 && rows > remaining() / 8 / cols) {
      throw FormatError("corrupt payload: matrix larger than remaining bytes");
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    }
    return m;
  }

  Reader section(const Tag& expected) {
    const auto t = take(4);
    if (!std::equal(expected.begin(), expected.end(), t.begin())) {
      throw FormatError("expected section '" + std::string(expected.begin(), expected.end()) + "', found '" +
                        std::string(t.begin(), t.end()) + "'");
    }
    const std::uint64_t len = u64();
    if (len > remaining()) {
      throw FormatError("truncated section '" + std::string(expected.begin(), expected.end()) + "'");
    }
    return Reader(take(static_cast<std::size_t>(len)));
  }

  void header() {
    const auto magic = take(4);
    if (std::memcmp(magic.data(), "ET2Q", 4) != 0) {
      throw FormatError("not an ET2Q model file");
    }
    const auto version = u16();
    if (version != kFormatVersion) {
      throw FormatError("unsupported format version " + std::to_string(version));
    }
  }

  void finish(const char* what) const {
    if (remaining() != 0) {
      throw FormatError(std::string("trailing bytes after ") + what);
    }
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > remaining()) {
      throw FormatError("truncated model file");
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  template <typename T>
  T get_le() {
    const auto s = take(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(s[i]) << (8 * i));
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

Writer write_hyper(const Hyperparameters& hp) {
  Writer w;
  w.f64(hp.beta);
  w.i32(hp.grades);
  w.f64(hp.rho);
  w.f64(hp.delta1);
  w.f64(hp.eta);
  w.i32(hp.n_history);
  w.i32(hp.gmm_components);
  w.u8(static_cast<std::uint8_t>(hp.mode));
  w.u64(hp.seed);
  w.u8(hp.normalize ? 1 : 0);
  return w;
}

Hyperparameters read_hyper(Reader r) {
  Hyperparameters hp;
  hp.beta = r.f64();
  hp.grades = r.i32();
  hp.rho = r.f64();
  hp.delta1 = r.f64();
  hp.eta = r.f64();
  hp.n_history = r.i32();
  hp.gmm_components = r.i32();
  const auto mode = r.u8();
  if (mode > 1) throw FormatError("unknown classifier mode");
  hp.mode = static_cast<ClassifierMode>(mode);
  hp.seed = r.u64();
  hp.normalize = r.u8() != 0;
  r.finish("hyperparameters");
  return hp;
}

Writer write_network(const NetworkState& n) {
  Writer w;
  w.i32(n.input_dim);
  w.i32(n.class_dim);
  w.i32(n.grades);
  w.f64(n.beta);
  w.vec(n.q_lower);
  w.vec(n.q_upper);
  w.u64(n.rules.size());
  for (const Rule& rule : n.rules) {
    w.vec(rule.mean);
    w.mat(rule.jumps.upper);
    w.mat(rule.jumps.lower);
    w.mat(rule.omega_upper);
    w.mat(rule.omega_lower);
  }
  return w;
}

NetworkState read_network(Reader r) {
  NetworkState n;
  n.input_dim = r.i32();
  n.class_dim = r.i32();
  n.grades = r.i32();
  n.beta = r.f64();
  n.q_lower = r.vec();
  n.q_upper = r.vec();
  if (n.input_dim < 1 || n.class_dim < 1 || n.grades < 1 || n.q_lower.size() != n.class_dim ||
      n.q_upper.size() != n.class_dim) {
    throw FormatError("corrupt network section");
  }
  const auto k = r.count(1);
  n.rules.reserve(static_cast<std::size_t>(k));
  for (std::uint64_t j = 0; j < k; ++j) {
    Rule rule;
    rule.mean = r.vec();
    rule.jumps.upper = r.mat<JumpMatrix>();
    rule.jumps.lower = r.mat<JumpMatrix>();
    rule.omega_upper = r.mat<Eigen::MatrixXd>();
    rule.omega_lower = r.mat<Eigen::MatrixXd>();
    n.rules.push_back(std::move(rule));
  }
  r.finish("network");
  return n;
}

Writer write_filter(const DekfState& f) {
  Writer w;
  w.f64(f.eta);
  w.u64(f.blocks.size());
  for (const auto& b : f.blocks) w.mat(b);
  return w;
}

Writer write_density(const DensityTracker& d) {
  Writer w;
  const SampleWindow& win = d.window();
  w.u64(win.capacity());
  w.i64(win.dim());
  w.u64(win.total_seen());
  w.vec(win.running_mean());
  w.vec(win.running_m2());
  w.u64(win.samples().size());
  for (const auto& s : win.samples()) w.vec(s);
  w.u64(d.components());
  w.u64(d.seed());
  w.u64(d.refits());
  const GmmDensity& g = d.current();
  w.u64(g.component_count());
  w.vec(g.weights);
  for (std::size_t h = 0; h < g.component_count(); ++h) {
    w.vec(g.means[h]);
    w.vec(g.variances[h]);
  }
  return w;
}

DensityTracker read_density(Reader r) {
  const auto capacity = r.u64();
  const auto dim = r.i64();
  const auto seen = r.u64();
  Eigen::VectorXd mean = r.vec();
  Eigen::VectorXd m2 = r.vec();
  const auto n = r.count(8);
  std::deque<Eigen::VectorXd> samples;
  for (std::uint64_t i = 0; i < n; ++i) samples.push_back(r.vec());
  SampleWindow win;
  try {
    win.restore(static_cast<std::size_t>(capacity), static_cast<Eigen::Index>(dim), seen, std::move(mean),
                std::move(m2), std::move(samples));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("corrupt density section: ") + e.what());
  }
  const auto components = r.u64();
  const auto seed = r.u64();
  const auto refits = r.u64();
  GmmDensity g;
  const auto h = r.count(16);
  g.weights = r.vec();
  if (static_cast<std::uint64_t>(g.weights.size()) != h) throw FormatError("corrupt mixture weights");
  for (std::uint64_t c = 0; c < h; ++c) {
    g.means.push_back(r.vec());
    g.variances.push_back(r.vec());
  }
  r.finish("density");
  DensityTracker d;
  d.restore(std::move(win), std::move(g), static_cast<std::size_t>(components), seed, refits);
  return d;
}

Writer write_model_body(const OnlineModel& m) {
  Writer w;
  w.section(kHyperTag, write_hyper(m.hyperparameters()));
  w.section(kNetworkTag, write_network(m.network()));
  w.section(kFilterTag, write_filter(m.filter()));
  w.section(kDensityTag, write_density(m.density()));
  Writer s;
  s.u64(m.steps());
  s.u64(m.ordering_violations());
  s.u64(m.growth_steps().size());
  for (auto v : m.growth_steps()) s.u64(v);
  w.section(kStepTag, s);
  return w;
}

OnlineModel read_model_body(Reader r) {
  OnlineModel::Parts parts;
  parts.hp = read_hyper(r.section(kHyperTag));
  parts.network = read_network(r.section(kNetworkTag));
  {
    Reader f = r.section(kFilterTag);
    parts.filter.eta = f.f64();
    const auto blocks = f.count(16);
    for (std::uint64_t b = 0; b < blocks; ++b) parts.filter.blocks.push_back(f.mat<Eigen::MatrixXd>());
    f.finish("filter");
  }
  parts.density = read_density(r.section(kDensityTag));
  {
    Reader s = r.section(kStepTag);
    parts.steps = s.u64();
    parts.ordering_violations = s.u64();
    const auto n = s.count(8);
    for (std::uint64_t i = 0; i < n; ++i) parts.growth_steps.push_back(s.u64());
    s.finish("step counters");
  }
  r.finish("model");
  try {
    const auto& net = parts.network;
    parts.filter.layout = layout_for(net.input_dim, net.class_dim, net.grades);
    return OnlineModel::from_parts(std::move(parts));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("inconsistent model state: ") + e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> serialize(const OnlineModel& model) {
  Writer w;
  w.raw("ET2Q");
  w.u16(kFormatVersion);
  w.section(kModelTag, write_model_body(model));
  return w.take();
}

std::vector<std::uint8_t> serialize(const Classifier& classifier) {
  Writer body;
  body.section(kHyperTag, write_hyper(classifier.hyperparameters()));
  Writer dims;
  dims.i32(classifier.input_dim());
  dims.i32(classifier.class_count());
  dims.u32(static_cast<std::uint32_t>(classifier.models().size()));
  body.section(kDimsTag, dims);
  Writer norm;
  const auto& nz = classifier.normalizer();
  norm.u8(nz.fitted() ? 1 : 0);
  if (nz.fitted()) {
    norm.vec(nz.low);
    norm.vec(nz.high);
  }
  body.section(kNormTag, norm);
  Writer pend;
  pend.u64(classifier.pending().size());
  for (const auto& p : classifier.pending()) {
    pend.vec(p.x);
    pend.i32(p.label);
  }
  body.section(kPendingTag, pend);
  for (const auto& m : classifier.models()) body.section(kModelTag, write_model_body(m));

  Writer w;
  w.raw("ET2Q");
  w.u16(kFormatVersion);
  w.section(kClassifierTag, body);
  return w.take();
}

OnlineModel deserialize_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.header();
  OnlineModel m = read_model_body(r.section(kModelTag));
  r.finish("file");
  return m;
}

Classifier deserialize_classifier(std::span<const std::uint8_t> bytes) {
  Reader file(bytes);
  file.header();
  Reader r = file.section(kClassifierTag);
  file.finish("file");

  Classifier::Parts parts;
  parts.hp = read_hyper(r.section(kHyperTag));
  std::uint32_t model_count = 0;
  {
    Reader d = r.section(kDimsTag);
    parts.input_dim = d.i32();
    parts.class_count = d.i32();
    model_count = d.u32();
    d.finish("dimensions");
  }
  {
    Reader n = r.section(kNormTag);
    if (n.u8() != 0) {
      parts.normalizer.low = n.vec();
      parts.normalizer.high = n.vec();
    }
    n.finish("normalizer");
  }
  {
    Reader p = r.section(kPendingTag);
    const auto count = p.count(12);
    for (std::uint64_t i = 0; i < count; ++i) {
      BufferedSample s;
      s.x = p.vec();
      s.label = p.i32();
      parts.pending.push_back(std::move(s));
    }
    p.finish("pending samples");
  }
  for (std::uint32_t i = 0; i < model_count; ++i) parts.models.push_back(read_model_body(r.section(kModelTag)));
  r.finish("classifier");
  try {
    return Classifier::from_parts(std::move(parts));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("inconsistent classifier state: ") + e.what());
  }
}

void save_classifier(const Classifier& classifier, const std::filesystem::path& path) {
  const auto bytes = serialize(classifier);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw std::runtime_error("failed writing '" + path.string() + "'");
  }
}

Classifier load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open model file '" + path.string() + "'");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_classifier(bytes);
}

}  // namespace et2q
