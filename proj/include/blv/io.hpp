#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "blv/evaluation.hpp"
#include "blv/learning.hpp"
#include "blv/statistics.hpp"
#include "blv/synthesis.hpp"

namespace blv {

// ---------------------------------------------------------------------------
// small formatting / parsing helpers
// ---------------------------------------------------------------------------

// full-precision decimal rendering; round-trips any finite double
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == delim) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("could not parse number '" + s + "' in " + what);
  }
}

inline long long parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("could not parse integer '" + s + "' in " + what);
  }
}

// "# key=value key=value" header lines
inline void parse_meta(const std::string& line, std::map<std::string, std::string>& meta) {
  std::istringstream ss(line.substr(1));
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) meta[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
}

inline const std::string& require_meta(const std::map<std::string, std::string>& meta,
                                       const std::string& key, const std::string& what) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw DataError(what + ": missing header field '" + key + "'");
  return it->second;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint32_t crc32(const std::string& bytes) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (unsigned char ch : bytes) crc = table[(crc ^ ch) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to file: " + path);
}

// ---------------------------------------------------------------------------
// little-endian payload writer / reader
// ---------------------------------------------------------------------------

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void bits(const std::vector<std::uint8_t>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    std::uint8_t acc = 0;
    int nfill = 0;
    for (std::uint8_t b : v) {
      acc |= static_cast<std::uint8_t>((b ? 1 : 0) << nfill);
      if (++nfill == 8) {
        u8(acc);
        acc = 0;
        nfill = 0;
      }
    }
    if (nfill) u8(acc);
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::string what) : buf_(bytes), what_(std::move(what)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<std::uint8_t> bits() {
    const std::uint32_t n = u32();
    std::vector<std::uint8_t> v(n, 0);
    const std::uint32_t nbytes = (n + 7) / 8;
    need(nbytes);
    for (std::uint32_t j = 0; j < n; ++j) {
      const auto byte = static_cast<unsigned char>(buf_[pos_ + j / 8]);
      v[j] = (byte >> (j % 8)) & 1;
    }
    pos_ += nbytes;
    return v;
  }
  bool exhausted() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > buf_.size()) throw DataError(what_ + ": truncated payload");
  }
  const std::string& buf_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// versioned, checksummed binary container
// ---------------------------------------------------------------------------

enum class FileKind : std::uint32_t {
  model = 1,
  ground_truth = 2,
  dataset = 3,
  corpus = 4,
  match_report = 5,
};

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr char kMagic[4] = {'B', 'L', 'V', 'B'};

inline void write_container(const std::string& path, FileKind kind, const std::string& payload) {
  detail::Writer w;
  w.u8(static_cast<std::uint8_t>(kMagic[0]));
  w.u8(static_cast<std::uint8_t>(kMagic[1]));
  w.u8(static_cast<std::uint8_t>(kMagic[2]));
  w.u8(static_cast<std::uint8_t>(kMagic[3]));
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(kind));
  w.u64(payload.size());
  std::string bytes = w.bytes();
  bytes += payload;
  detail::Writer crc;
  crc.u32(detail::crc32(payload));
  bytes += crc.bytes();
  detail::write_file_bytes(path, bytes);
}

inline std::string read_container(const std::string& path, FileKind expected) {
  const std::string bytes = detail::read_file_bytes(path);
  detail::Reader r(bytes, path);
  if (bytes.size() < 20) throw DataError(path + ": not a blv container (file too small)");
  for (char c : kMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) throw DataError(path + ": bad magic; not a blv container");
  }
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw DataError(path + ": unsupported container version " + std::to_string(version));
  }
  const auto kind = static_cast<FileKind>(r.u32());
  if (kind != expected) {
    throw DataError(path + ": wrong file kind (expected " + std::to_string(static_cast<int>(expected)) +
                    ", found " + std::to_string(static_cast<int>(kind)) + ")");
  }
  const std::uint64_t size = r.u64();
  if (bytes.size() != 20 + size + 4) throw DataError(path + ": truncated or oversized container");
  const std::string payload = bytes.substr(20, size);
  const std::string tail_bytes = bytes.substr(20 + size, 4);
  detail::Reader tail(tail_bytes, path);
  if (detail::crc32(payload) != tail.u32()) {
    throw DataError(path + ": checksum mismatch (corrupt file)");
  }
  return payload;
}

inline FileKind peek_kind(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  if (bytes.size() < 12) throw DataError(path + ": not a blv container (file too small)");
  detail::Reader r(bytes, path);
  for (char c : kMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) throw DataError(path + ": bad magic; not a blv container");
  }
  r.u32();  // version checked on full load
  return static_cast<FileKind>(r.u32());
}

// ---------------------------------------------------------------------------
// payload encodings
// ---------------------------------------------------------------------------

namespace detail {

inline void put_params(Writer& w, const ModelParams& m) {
  w.i32(m.n_cells);
  w.i32(m.n_latents);
  for (double v : m.rho.data) w.f64(v);
  for (double v : m.r_logit) w.f64(v);
  w.f64(m.q_logit);
}

inline ModelParams get_params(Reader& r) {
  const int n = r.i32();
  const int m = r.i32();
  if (n < 1 || m < 1) throw DataError("model payload: invalid dimensions");
  ModelParams p(n, m);
  for (double& v : p.rho.data) v = r.f64();
  for (double& v : p.r_logit) v = r.f64();
  p.q_logit = r.f64();
  return p;
}

inline void put_he(Writer& w, const HEState& s) {
  w.i64(s.steps);
  w.u32(static_cast<std::uint32_t>(s.rates.size()));
  for (double v : s.rates) w.f64(v);
}

inline HEState get_he(Reader& r) {
  HEState s;
  s.steps = r.i64();
  s.rates.resize(r.u32());
  for (double& v : s.rates) v = r.f64();
  return s;
}

inline void put_learn_config(Writer& w, const LearnConfig& c) {
  w.f64(c.learning_rate);
  w.f64(c.lr_decay);
  w.i32(c.n_passes);
  w.u8(c.prior_kind == PriorKind::binomial ? 0 : 1);
  w.u8(c.sample_order == SampleOrder::shuffled ? 0 : 1);
  w.u64(c.rng_seed);
  w.f64(c.init_silence);
  w.f64(c.init_jitter_sd);
  w.f64(c.q_init);
  w.i32(c.i0);
  w.i32(c.imax);
}

inline LearnConfig get_learn_config(Reader& r) {
  LearnConfig c;
  c.learning_rate = r.f64();
  c.lr_decay = r.f64();
  c.n_passes = r.i32();
  c.prior_kind = r.u8() == 0 ? PriorKind::binomial : PriorKind::homeostatic_egalitarian;
  c.sample_order = r.u8() == 0 ? SampleOrder::shuffled : SampleOrder::sequential;
  c.rng_seed = r.u64();
  c.init_silence = r.f64();
  c.init_jitter_sd = r.f64();
  c.q_init = r.f64();
  c.i0 = r.i32();
  c.imax = r.i32();
  return c;
}

inline void put_trace(Writer& w, const TrainTrace& t) {
  w.u32(static_cast<std::uint32_t>(t.pass_mean_log_joint.size()));
  for (double v : t.pass_mean_log_joint) w.f64(v);
  w.u32(static_cast<std::uint32_t>(t.usage.size()));
  for (std::int64_t v : t.usage) w.i64(v);
  w.u32(static_cast<std::uint32_t>(t.final_pass_usage.size()));
  for (std::int64_t v : t.final_pass_usage) w.i64(v);
}

inline TrainTrace get_trace(Reader& r) {
  TrainTrace t;
  t.pass_mean_log_joint.resize(r.u32());
  for (double& v : t.pass_mean_log_joint) v = r.f64();
  t.usage.resize(r.u32());
  for (std::int64_t& v : t.usage) v = r.i64();
  t.final_pass_usage.resize(r.u32());
  for (std::int64_t& v : t.final_pass_usage) v = r.i64();
  return t;
}

inline void put_hyper(Writer& w, const SynthHyperparams& h) {
  w.i32(h.n_cells);
  w.i32(h.n_latents);
  w.i32(h.k);
  w.i32(h.k_min);
  w.i32(h.k_max);
  w.i32(h.c);
  w.i32(h.c_min);
  w.i32(h.c_max);
  w.f64(h.mu_p);
  w.f64(h.sigma_p);
  w.f64(h.mu_r);
  w.f64(h.sigma_r);
  w.f64(h.sigma_q);
}

inline SynthHyperparams get_hyper(Reader& r) {
  SynthHyperparams h;
  h.n_cells = r.i32();
  h.n_latents = r.i32();
  h.k = r.i32();
  h.k_min = r.i32();
  h.k_max = r.i32();
  h.c = r.i32();
  h.c_min = r.i32();
  h.c_max = r.i32();
  h.mu_p = r.f64();
  h.sigma_p = r.f64();
  h.mu_r = r.f64();
  h.sigma_r = r.f64();
  h.sigma_q = r.f64();
  return h;
}

inline void put_gt(Writer& w, const GroundTruth& gt) {
  put_hyper(w, gt.hyper);
  put_params(w, gt.params);
  w.bits(gt.s);
}

inline GroundTruth get_gt(Reader& r) {
  GroundTruth gt;
  gt.hyper = get_hyper(r);
  gt.params = get_params(r);
  gt.s = r.bits();
  if (static_cast<int>(gt.s.size()) != gt.hyper.n_cells * gt.hyper.n_latents) {
    throw DataError("ground-truth payload: membership matrix size mismatch");
  }
  return gt;
}

}  // namespace detail

// Trained-model container: parameters plus the HE usage state (when the HE
// prior was used), the learning configuration and the training trace.
struct ModelFile {
  ModelParams params;
  bool has_he = false;
  HEState he;
  LearnConfig cfg;
  TrainTrace trace;
};

inline void save_model(const std::string& path, const ModelFile& mf) {
  detail::Writer w;
  detail::put_params(w, mf.params);
  w.u8(mf.has_he ? 1 : 0);
  if (mf.has_he) detail::put_he(w, mf.he);
  detail::put_learn_config(w, mf.cfg);
  detail::put_trace(w, mf.trace);
  write_container(path, FileKind::model, w.bytes());
}

inline ModelFile load_model(const std::string& path) {
  const std::string payload = read_container(path, FileKind::model);
  detail::Reader r(payload, path);
  ModelFile mf;
  mf.params = detail::get_params(r);
  mf.has_he = r.u8() != 0;
  if (mf.has_he) mf.he = detail::get_he(r);
  mf.cfg = detail::get_learn_config(r);
  mf.trace = detail::get_trace(r);
  return mf;
}

inline void save_ground_truth(const std::string& path, const GroundTruth& gt) {
  detail::Writer w;
  detail::put_gt(w, gt);
  write_container(path, FileKind::ground_truth, w.bytes());
}

inline GroundTruth load_ground_truth(const std::string& path) {
  const std::string payload = read_container(path, FileKind::ground_truth);
  detail::Reader r(payload, path);
  return detail::get_gt(r);
}

inline void save_dataset(const std::string& path, const LabeledDataset& ds) {
  detail::Writer w;
  detail::put_gt(w, ds.gt);
  w.u32(static_cast<std::uint32_t>(ds.words.size()));
  for (std::size_t i = 0; i < ds.words.size(); ++i) {
    w.bits(ds.latents[i].bits);
    w.bits(ds.words[i].bits);
  }
  write_container(path, FileKind::dataset, w.bytes());
}

inline LabeledDataset load_dataset(const std::string& path) {
  const std::string payload = read_container(path, FileKind::dataset);
  detail::Reader r(payload, path);
  LabeledDataset ds;
  ds.gt = detail::get_gt(r);
  const std::uint32_t t = r.u32();
  ds.latents.reserve(t);
  ds.words.reserve(t);
  for (std::uint32_t i = 0; i < t; ++i) {
    LatentVector z;
    z.bits = r.bits();
    SpikeWord y;
    y.bits = r.bits();
    ds.latents.push_back(std::move(z));
    ds.words.push_back(std::move(y));
  }
  return ds;
}

// Binned spike-word corpus with provenance and optional per-word timestamps.
struct BinnedCorpus {
  int n_cells = 0;
  double bin_ms = 0.0;
  double step_ms = 0.0;
  std::uint64_t source_digest = 0;
  int n_trials = 1;
  double duration_ms = 0.0;
  bool has_stamps = false;
  std::vector<std::pair<int, double>> stamps;  // (trial, window start ms)
  Corpus words;
};

inline void save_corpus(const std::string& path, const BinnedCorpus& c) {
  detail::Writer w;
  w.i32(c.n_cells);
  w.f64(c.bin_ms);
  w.f64(c.step_ms);
  w.u64(c.source_digest);
  w.i32(c.n_trials);
  w.f64(c.duration_ms);
  w.u8(c.has_stamps ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(c.words.size()));
  if (c.has_stamps) {
    for (const auto& [trial, t] : c.stamps) {
      w.i32(trial);
      w.f64(t);
    }
  }
  for (const auto& word : c.words) w.bits(word.bits);
  write_container(path, FileKind::corpus, w.bytes());
}

inline BinnedCorpus load_corpus(const std::string& path) {
  const std::string payload = read_container(path, FileKind::corpus);
  detail::Reader r(payload, path);
  BinnedCorpus c;
  c.n_cells = r.i32();
  c.bin_ms = r.f64();
  c.step_ms = r.f64();
  c.source_digest = r.u64();
  c.n_trials = r.i32();
  c.duration_ms = r.f64();
  c.has_stamps = r.u8() != 0;
  const std::uint32_t t = r.u32();
  if (c.has_stamps) {
    c.stamps.reserve(t);
    for (std::uint32_t i = 0; i < t; ++i) {
      const int trial = r.i32();
      const double ms = r.f64();
      c.stamps.emplace_back(trial, ms);
    }
  }
  c.words.reserve(t);
  for (std::uint32_t i = 0; i < t; ++i) {
    SpikeWord word;
    word.bits = r.bits();
    if (word.size() != c.n_cells) throw DataError(path + ": corpus word length mismatch");
    c.words.push_back(std::move(word));
  }
  return c;
}

struct MatchFile {
  std::string id_a;
  std::string id_b;
  MatchReport report;
};

inline void save_match_report(const std::string& path, const MatchFile& mf) {
  detail::Writer w;
  w.str(mf.id_a);
  w.str(mf.id_b);
  w.u32(static_cast<std::uint32_t>(mf.report.assignment.size()));
  for (int a : mf.report.assignment) w.i32(a);
  for (double v : mf.report.matched_cs) w.f64(v);
  for (double v : mf.report.unmatched_diag_cs) w.f64(v);
  w.f64(mf.report.delta_cs);
  write_container(path, FileKind::match_report, w.bytes());
}

inline MatchFile load_match_report(const std::string& path) {
  const std::string payload = read_container(path, FileKind::match_report);
  detail::Reader r(payload, path);
  MatchFile mf;
  mf.id_a = r.str();
  mf.id_b = r.str();
  const std::uint32_t m = r.u32();
  mf.report.assignment.resize(m);
  for (int& a : mf.report.assignment) a = r.i32();
  mf.report.matched_cs.resize(m);
  for (double& v : mf.report.matched_cs) v = r.f64();
  mf.report.unmatched_diag_cs.resize(m);
  for (double& v : mf.report.unmatched_diag_cs) v = r.f64();
  mf.report.delta_cs = r.f64();
  return mf;
}

// ---------------------------------------------------------------------------
// spike-event text files and binning
// ---------------------------------------------------------------------------

// Delimited text with a self-describing header:
//   # blv-events v1
//   # n_cells=55 n_trials=200 trial_duration_ms=5000
//   cell,trial,time_ms
//   12,0,483.2
struct SpikeEventFile {
  int n_cells = 0;
  int n_trials = 0;
  double trial_duration_ms = 0.0;
  struct Event {
    int cell = 0;
    int trial = 0;
    double t_ms = 0.0;
  };
  std::vector<Event> events;
  std::uint64_t digest = 0;  // FNV-1a of the raw file bytes, set on load
};

inline SpikeEventFile load_events(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  SpikeEventFile f;
  f.digest = detail::fnv1a64(bytes);
  std::istringstream in(bytes);
  std::string line;
  std::map<std::string, std::string> meta;
  bool saw_tag = false;
  bool saw_columns = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("blv-events") != std::string::npos) saw_tag = true;
      detail::parse_meta(line, meta);
      continue;
    }
    if (!saw_columns) {  // literal column-header row
      if (line != "cell,trial,time_ms") {
        throw DataError(path + ": expected column header 'cell,trial,time_ms', found '" + line + "'");
      }
      saw_columns = true;
      if (!saw_tag) throw DataError(path + ": missing '# blv-events v1' header");
      f.n_cells = static_cast<int>(detail::parse_int(detail::require_meta(meta, "n_cells", path), path));
      f.n_trials = static_cast<int>(detail::parse_int(detail::require_meta(meta, "n_trials", path), path));
      f.trial_duration_ms = detail::parse_double(detail::require_meta(meta, "trial_duration_ms", path), path);
      if (f.n_cells < 1 || f.n_trials < 1 || !(f.trial_duration_ms > 0)) {
        throw DataError(path + ": invalid header dimensions");
      }
      continue;
    }
    const auto parts = detail::split(line, ',');
    if (parts.size() != 3) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed record '" + line + "'");
    }
    SpikeEventFile::Event e;
    e.cell = static_cast<int>(detail::parse_int(detail::strip(parts[0]), path));
    e.trial = static_cast<int>(detail::parse_int(detail::strip(parts[1]), path));
    e.t_ms = detail::parse_double(detail::strip(parts[2]), path);
    if (e.cell < 0 || e.cell >= f.n_cells) {
      throw DataError(path + ":" + std::to_string(lineno) + ": cell id " + std::to_string(e.cell) + " out of range");
    }
    if (e.trial < 0 || e.trial >= f.n_trials) {
      throw DataError(path + ":" + std::to_string(lineno) + ": trial id " + std::to_string(e.trial) + " out of range");
    }
    if (e.t_ms < 0.0 || e.t_ms >= f.trial_duration_ms) {
      throw DataError(path + ":" + std::to_string(lineno) + ": spike time " + fmt_g17(e.t_ms) + " outside [0, duration)");
    }
    f.events.push_back(e);
  }
  if (!saw_columns) throw DataError(path + ": no column header found");
  return f;
}

inline void save_events(const std::string& path, const SpikeEventFile& f) {
  std::ostringstream out;
  out << "# blv-events v1\n";
  out << "# n_cells=" << f.n_cells << " n_trials=" << f.n_trials
      << " trial_duration_ms=" << fmt_g17(f.trial_duration_ms) << "\n";
  out << "cell,trial,time_ms\n";
  for (const auto& e : f.events) {
    out << e.cell << ',' << e.trial << ',' << fmt_g17(e.t_ms) << '\n';
  }
  detail::write_file_bytes(path, out.str());
}

// Sliding-window binarization: one window per step_ms offset per trial,
// y_i = 1 iff cell i spiked within [t, t + bin_ms). Window count per trial is
// floor((duration - bin_ms)/step_ms) + 1.
inline BinnedCorpus bin_events(const SpikeEventFile& f, double bin_ms, double step_ms) {
  if (!(step_ms > 0.0) || bin_ms < step_ms) {
    throw DataError("bin_events: need bin_ms >= step_ms > 0");
  }
  const long long per_trial =
      f.trial_duration_ms < bin_ms
          ? 0
          : static_cast<long long>(std::floor((f.trial_duration_ms - bin_ms) / step_ms)) + 1;

  BinnedCorpus c;
  c.n_cells = f.n_cells;
  c.bin_ms = bin_ms;
  c.step_ms = step_ms;
  c.source_digest = f.digest;
  c.n_trials = f.n_trials;
  c.duration_ms = f.trial_duration_ms;
  c.has_stamps = true;
  const long long total = per_trial * f.n_trials;
  c.words.assign(static_cast<std::size_t>(total), SpikeWord(f.n_cells));
  c.stamps.resize(static_cast<std::size_t>(total));
  for (int trial = 0; trial < f.n_trials; ++trial) {
    for (long long wdx = 0; wdx < per_trial; ++wdx) {
      c.stamps[static_cast<std::size_t>(trial * per_trial + wdx)] = {trial, static_cast<double>(wdx) * step_ms};
    }
  }
  for (const auto& e : f.events) {
    const long long lo = std::max<long long>(
        0, static_cast<long long>(std::floor((e.t_ms - bin_ms) / step_ms)) + 1);
    const long long hi = std::min<long long>(per_trial - 1,
                                             static_cast<long long>(std::floor(e.t_ms / step_ms)));
    for (long long wdx = lo; wdx <= hi; ++wdx) {
      c.words[static_cast<std::size_t>(e.trial * per_trial + wdx)].bits[static_cast<std::size_t>(e.cell)] = 1;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// per-cell, per-time-bin null firing-rate table (externally fitted GLM rates)
// ---------------------------------------------------------------------------

// # blv-null-rates v1
// # n_cells=3 n_bins=1000 bin_ms=1
// then one comma-delimited row of n_cells probabilities per time bin
struct NullRateTable {
  int n_cells = 0;
  double bin_ms = 1.0;
  std::vector<std::vector<double>> rates;  // [bin][cell]
};

inline NullRateTable load_null_rates(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  std::istringstream in(bytes);
  std::string line;
  std::map<std::string, std::string> meta;
  NullRateTable t;
  bool saw_tag = false;
  bool header_done = false;
  while (std::getline(in, line)) {
    line = detail::strip(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("blv-null-rates") != std::string::npos) saw_tag = true;
      detail::parse_meta(line, meta);
      continue;
    }
    if (!header_done) {
      if (!saw_tag) throw DataError(path + ": missing '# blv-null-rates v1' header");
      t.n_cells = static_cast<int>(detail::parse_int(detail::require_meta(meta, "n_cells", path), path));
      t.bin_ms = detail::parse_double(detail::require_meta(meta, "bin_ms", path), path);
      if (t.n_cells < 1 || !(t.bin_ms > 0)) throw DataError(path + ": invalid header");
      header_done = true;
    }
    const auto parts = detail::split(line, ',');
    if (static_cast<int>(parts.size()) != t.n_cells) {
      throw DataError(path + ": rate row has " + std::to_string(parts.size()) + " entries, expected " +
                      std::to_string(t.n_cells));
    }
    std::vector<double> row(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
      row[i] = detail::parse_double(detail::strip(parts[i]), path);
      if (row[i] < 0.0 || row[i] > 1.0) throw DataError(path + ": rate outside [0,1]");
    }
    t.rates.push_back(std::move(row));
  }
  if (t.rates.empty()) throw DataError(path + ": no rate rows");
  return t;
}

inline void save_null_rates(const std::string& path, const NullRateTable& t) {
  std::ostringstream out;
  out << "# blv-null-rates v1\n";
  out << "# n_cells=" << t.n_cells << " n_bins=" << t.rates.size() << " bin_ms=" << fmt_g17(t.bin_ms) << "\n";
  for (const auto& row : t.rates) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << fmt_g17(row[i]);
    }
    out << '\n';
  }
  detail::write_file_bytes(path, out.str());
}

// ---------------------------------------------------------------------------
// moment summary as a delimited table (full precision, re-importable)
// ---------------------------------------------------------------------------

inline void save_moments_csv(const std::string& path, const MomentSummary& s) {
  std::ostringstream out;
  out << "# blv-moments v1\n";
  out << "# n_cells=" << s.n_cells << " n_words=" << s.n_words << "\n";
  out << "stat,i,j,value\n";
  for (std::size_t k = 0; k < s.word_length_counts.size(); ++k) {
    out << "length_count," << k << ",," << s.word_length_counts[k] << '\n';
  }
  for (std::size_t k = 0; k < s.word_length_pdf.size(); ++k) {
    out << "length_pdf," << k << ",," << fmt_g17(s.word_length_pdf[k]) << '\n';
  }
  for (int i = 0; i < s.n_cells; ++i) {
    out << "cell_mean," << i << ",," << fmt_g17(s.cell_means[static_cast<std::size_t>(i)]) << '\n';
  }
  for (int i = 0; i < s.n_cells; ++i) {
    for (int j = i + 1; j < s.n_cells; ++j) {
      out << "coactivity," << i << ',' << j << ',' << fmt_g17(s.pair_coactivity(i, j)) << '\n';
    }
  }
  detail::write_file_bytes(path, out.str());
}

inline MomentSummary load_moments_csv(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  std::istringstream in(bytes);
  std::string line;
  std::map<std::string, std::string> meta;
  MomentSummary s;
  bool header_done = false;
  while (std::getline(in, line)) {
    line = detail::strip(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      detail::parse_meta(line, meta);
      continue;
    }
    if (!header_done) {
      if (line != "stat,i,j,value") throw DataError(path + ": expected moments column header");
      s.n_cells = static_cast<int>(detail::parse_int(detail::require_meta(meta, "n_cells", path), path));
      s.n_words = detail::parse_int(detail::require_meta(meta, "n_words", path), path);
      if (s.n_cells < 1 || s.n_words < 1) throw DataError(path + ": invalid moments header");
      s.word_length_counts.assign(static_cast<std::size_t>(s.n_cells) + 1, 0);
      s.word_length_pdf.assign(static_cast<std::size_t>(s.n_cells) + 1, 0.0);
      s.cell_means.assign(static_cast<std::size_t>(s.n_cells), 0.0);
      s.pair_coactivity = Matrix(s.n_cells, s.n_cells, 0.0);
      header_done = true;
      continue;
    }
    const auto parts = detail::split(line, ',');
    if (parts.size() != 4) throw DataError(path + ": malformed row '" + line + "'");
    const std::string& stat = parts[0];
    if (stat == "length_count") {
      const auto k = static_cast<std::size_t>(detail::parse_int(parts[1], path));
      if (k >= s.word_length_counts.size()) throw DataError(path + ": length index out of range");
      s.word_length_counts[k] = detail::parse_int(parts[3], path);
    } else if (stat == "length_pdf") {
      const auto k = static_cast<std::size_t>(detail::parse_int(parts[1], path));
      if (k >= s.word_length_pdf.size()) throw DataError(path + ": length index out of range");
      s.word_length_pdf[k] = detail::parse_double(parts[3], path);
    } else if (stat == "cell_mean") {
      const auto i = static_cast<std::size_t>(detail::parse_int(parts[1], path));
      if (i >= s.cell_means.size()) throw DataError(path + ": cell index out of range");
      s.cell_means[i] = detail::parse_double(parts[3], path);
    } else if (stat == "coactivity") {
      const int i = static_cast<int>(detail::parse_int(parts[1], path));
      const int j = static_cast<int>(detail::parse_int(parts[2], path));
      if (i < 0 || j < 0 || i >= s.n_cells || j >= s.n_cells) throw DataError(path + ": pair index out of range");
      const double v = detail::parse_double(parts[3], path);
      s.pair_coactivity(i, j) = v;
      s.pair_coactivity(j, i) = v;
    } else {
      throw DataError(path + ": unknown stat '" + stat + "'");
    }
  }
  if (!header_done) throw DataError(path + ": no moments header found");
  for (int i = 0; i < s.n_cells; ++i) s.pair_coactivity(i, i) = s.cell_means[static_cast<std::size_t>(i)];
  return s;
}

// ---------------------------------------------------------------------------
// inferred-assignment table (output of `infer`, input of `metrics`/`coactivity`)
// ---------------------------------------------------------------------------

struct AssignmentFile {
  int n_latents = 0;
  int n_trials = 1;
  double duration_ms = 0.0;
  bool has_stamps = false;
  std::vector<std::pair<int, double>> stamps;  // per word (trial, t_ms)
  std::vector<LatentVector> latents;
};

inline void save_assignments(const std::string& path, const AssignmentFile& a) {
  std::ostringstream out;
  out << "# blv-assignments v1\n";
  out << "# n_latents=" << a.n_latents << " n_words=" << a.latents.size()
      << " n_trials=" << a.n_trials << " duration_ms=" << fmt_g17(a.duration_ms)
      << " has_stamps=" << (a.has_stamps ? 1 : 0) << "\n";
  out << "word,trial,t_ms,latents\n";
  for (std::size_t w = 0; w < a.latents.size(); ++w) {
    out << w << ',' << a.stamps[w].first << ',' << fmt_g17(a.stamps[w].second) << ',';
    bool first = true;
    for (int l = 0; l < a.latents[w].size(); ++l) {
      if (a.latents[w].bits[static_cast<std::size_t>(l)]) {
        if (!first) out << ' ';
        out << l;
        first = false;
      }
    }
    out << '\n';
  }
  detail::write_file_bytes(path, out.str());
}

inline AssignmentFile load_assignments(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  std::istringstream in(bytes);
  std::string line;
  std::map<std::string, std::string> meta;
  AssignmentFile a;
  bool header_done = false;
  while (std::getline(in, line)) {
    line = detail::strip(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      detail::parse_meta(line, meta);
      continue;
    }
    if (!header_done) {
      if (line != "word,trial,t_ms,latents") throw DataError(path + ": expected assignments column header");
      a.n_latents = static_cast<int>(detail::parse_int(detail::require_meta(meta, "n_latents", path), path));
      a.n_trials = static_cast<int>(detail::parse_int(detail::require_meta(meta, "n_trials", path), path));
      a.duration_ms = detail::parse_double(detail::require_meta(meta, "duration_ms", path), path);
      a.has_stamps = detail::parse_int(detail::require_meta(meta, "has_stamps", path), path) != 0;
      header_done = true;
      continue;
    }
    const auto parts = detail::split(line, ',');
    if (parts.size() != 4) throw DataError(path + ": malformed assignment row '" + line + "'");
    LatentVector z(a.n_latents);
    std::istringstream ls(parts[3]);
    int idx;
    while (ls >> idx) {
      if (idx < 0 || idx >= a.n_latents) throw DataError(path + ": latent index out of range");
      z.bits[static_cast<std::size_t>(idx)] = 1;
    }
    a.stamps.emplace_back(static_cast<int>(detail::parse_int(parts[1], path)),
                          detail::parse_double(parts[2], path));
    a.latents.push_back(std::move(z));
  }
  if (!header_done) throw DataError(path + ": no assignments header found");
  return a;
}

// ---------------------------------------------------------------------------
// uniform word access for commands that accept a corpus or a labeled dataset
// ---------------------------------------------------------------------------

struct WordSource {
  Corpus words;
  int n_cells = 0;
  int n_trials = 1;
  double duration_ms = 0.0;
  bool has_stamps = false;
  std::vector<std::pair<int, double>> stamps;
};

// Labeled datasets carry no real time axis; words are stamped at one per
// millisecond in a single synthetic trial so downstream PSTH tooling works.
inline WordSource word_source_from_dataset(LabeledDataset ds) {
  WordSource src;
  src.n_cells = ds.gt.hyper.n_cells;
  src.words = std::move(ds.words);
  src.n_trials = 1;
  src.duration_ms = static_cast<double>(src.words.size());
  src.has_stamps = false;
  src.stamps.reserve(src.words.size());
  for (std::size_t w = 0; w < src.words.size(); ++w) src.stamps.emplace_back(0, static_cast<double>(w));
  return src;
}

inline WordSource word_source_from_corpus(BinnedCorpus c) {
  WordSource src;
  src.n_cells = c.n_cells;
  src.n_trials = c.n_trials;
  src.duration_ms = c.duration_ms;
  src.has_stamps = c.has_stamps;
  src.stamps = std::move(c.stamps);
  src.words = std::move(c.words);
  if (!src.has_stamps) {
    src.stamps.clear();
    src.duration_ms = static_cast<double>(src.words.size());
    for (std::size_t w = 0; w < src.words.size(); ++w) src.stamps.emplace_back(0, static_cast<double>(w));
  }
  return src;
}

inline WordSource load_word_source(const std::string& path) {
  const FileKind kind = peek_kind(path);
  if (kind == FileKind::corpus) return word_source_from_corpus(load_corpus(path));
  if (kind == FileKind::dataset) return word_source_from_dataset(load_dataset(path));
  throw DataError(path + ": expected a corpus or dataset file");
}

// Accepts either a trained model or a ground truth for matching/inference.
inline ModelParams load_any_params(const std::string& path) {
  const FileKind kind = peek_kind(path);
  if (kind == FileKind::model) return load_model(path).params;
  if (kind == FileKind::ground_truth) return load_ground_truth(path).params;
  throw DataError(path + ": expected a model or ground-truth file");
}

}  // namespace blv
