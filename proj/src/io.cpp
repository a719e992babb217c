#include "latcorr/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "latcorr/errors.hpp"

namespace latcorr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'L', 'A', 'T', 'C', 'K', 'P', 'T', '\0'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ull;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void pod(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out_.append(b, sizeof(T));
  }
  void text(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_ += s;
  }
  void doubles(const double* p, Index n) { out_.append(reinterpret_cast<const char*>(p), n * sizeof(double)); }
  void matrix(const Matrix& m) {
    pod<std::int64_t>(m.rows());
    pod<std::int64_t>(m.cols());
    doubles(m.data(), m.size());
  }
  void vector(const gradkit::Vector& v) {
    pod<std::int64_t>(v.size());
    doubles(v.data(), v.size());
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t n) : p_(data), end_(data + n) {}

  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, p_, sizeof(T));
    p_ += sizeof(T);
    return v;
  }
  std::string text() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s(p_, n);
    p_ += n;
    return s;
  }
  void doubles(double* out, Index n) {
    if (n < 0) throw FormatError("checkpoint: negative length");
    need(static_cast<std::size_t>(n) * sizeof(double));
    std::memcpy(out, p_, n * sizeof(double));
    p_ += n * sizeof(double);
  }
  Matrix matrix() {
    const auto r = pod<std::int64_t>();
    const auto c = pod<std::int64_t>();
    if (r < 0 || c < 0) throw FormatError("checkpoint: negative matrix shape");
    Matrix m(r, c);
    doubles(m.data(), m.size());
    return m;
  }
  gradkit::Vector vector() {
    const auto n = pod<std::int64_t>();
    if (n < 0) throw FormatError("checkpoint: negative vector length");
    gradkit::Vector v(n);
    doubles(v.data(), n);
    return v;
  }
  [[nodiscard]] bool done() const { return p_ == end_; }

 private:
  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end_ - p_) < n) throw FormatError("checkpoint: truncated file");
  }
  const char* p_;
  const char* end_;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  const auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) throw FormatError("not a number: '" + s + "'");
  return v;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::string coord_header(int dim) { return dim == 1 ? "coord_1" : "coord_1,coord_2"; }

}  // namespace

void write_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

// ----------------------------------------------------------- checkpoints

std::string encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.bytes().append(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.text(to_json(c.config).dump());

  const GpPrior& g = c.prior;
  w.pod<std::int32_t>(g.latent_dim());
  w.pod<std::int32_t>(g.feature_count());
  w.pod<std::int32_t>(g.input_dim());
  w.pod<double>(g.lengthscale());
  w.pod<std::uint64_t>(g.seed());
  w.matrix(g.frequencies());
  w.matrix(g.phases());

  const TrainState& s = c.state;
  w.pod<std::int64_t>(s.iteration);
  const auto& slices = s.params.layout().slices();
  w.pod<std::uint64_t>(slices.size());
  for (const auto& sl : slices) {
    w.text(sl.name);
    w.pod<std::int64_t>(sl.rows);
    w.pod<std::int64_t>(sl.cols);
  }
  w.vector(s.params.values());
  w.pod<std::int64_t>(s.adam.step);
  w.vector(s.adam.m);
  w.vector(s.adam.v);
  w.pod<std::uint64_t>(s.trace.size());
  for (const TraceRow& r : s.trace) {
    w.pod<std::int64_t>(r.iteration);
    w.pod<std::int32_t>(r.phase);
    for (double v : {r.total, r.data_u, r.data_f, r.data_b, r.kl}) w.pod<double>(v);
  }
  const std::uint64_t sum = fnv1a(w.bytes().data(), w.bytes().size());
  w.pod<std::uint64_t>(sum);
  return std::move(w.bytes());
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a checkpoint file");
  }
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (stored != fnv1a(bytes.data(), body)) throw FormatError("checkpoint checksum mismatch");

  Reader r(bytes.data() + sizeof(kMagic), body - sizeof(kMagic));
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  c.config = parse_config(json::parse(r.text()));

  const auto m = r.pod<std::int32_t>();
  const auto f = r.pod<std::int32_t>();
  const auto d = r.pod<std::int32_t>();
  const auto ell = r.pod<double>();
  const auto seed = r.pod<std::uint64_t>();
  Matrix freq = r.matrix();
  Matrix phases = r.matrix();
  c.prior = GpPrior(m, f, ell, d, seed, std::move(freq), std::move(phases));

  TrainState& s = c.state;
  s.iteration = r.pod<std::int64_t>();
  ParamLayout layout;
  const auto n = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string name = r.text();
    const auto rows = r.pod<std::int64_t>();
    const auto cols = r.pod<std::int64_t>();
    layout.add(name, rows, cols);
  }
  gradkit::Vector values = r.vector();
  if (values.size() != layout.size()) throw FormatError("checkpoint: parameter count does not match the layout");
  s.params = ParamVector(std::move(layout), std::move(values));
  s.adam.step = r.pod<std::int64_t>();
  s.adam.m = r.vector();
  s.adam.v = r.vector();
  const auto rows = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < rows; ++i) {
    TraceRow t;
    t.iteration = r.pod<std::int64_t>();
    t.phase = r.pod<std::int32_t>();
    t.total = r.pod<double>();
    t.data_u = r.pod<double>();
    t.data_f = r.pod<double>();
    t.data_b = r.pod<double>();
    t.kl = r.pod<double>();
    s.trace.push_back(t);
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return c;
}

void save_checkpoint(const fs::path& path, const Checkpoint& c) { write_atomic(path, encode_checkpoint(c)); }

Checkpoint load_checkpoint(const fs::path& path) { return decode_checkpoint(read_file(path)); }

// ---------------------------------------------------------------- tables

std::string dataset_csv(const DataSet& d, int dim) {
  std::string out = "channel," + coord_header(dim) + ",value\n";
  auto emit = [&](char q, const Observations& o) {
    if (o.size() > 0 && o.x.cols() != dim) throw ConfigError("dataset_csv: coordinate dimension mismatch");
    for (Index i = 0; i < o.size(); ++i) {
      out += q;
      for (int k = 0; k < dim; ++k) out += "," + format_double(o.x(i, k));
      out += "," + format_double(o.y[i]) + "\n";
    }
  };
  emit('u', d.u);
  emit('f', d.f);
  emit('b', d.b);
  return out;
}

DataSet parse_dataset_csv(const std::string& text, ProblemId problem) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw FormatError("dataset: empty file");
  const auto head = split(lines[0]);
  const int dim = static_cast<int>(head.size()) - 2;
  if (dim < 1 || dim > 2 || head[0] != "channel" || head.back() != "value") {
    throw FormatError("dataset: expected header channel,coord_1[,coord_2],value");
  }
  std::vector<std::vector<double>> rows[3];
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i]);
    if (cells.size() != head.size()) throw FormatError("dataset: row " + std::to_string(i) + " has the wrong width");
    const std::string& q = cells[0];
    const int c = q == "u" ? 0 : q == "f" ? 1 : q == "b" ? 2 : -1;
    if (c < 0) throw FormatError("dataset: unknown channel '" + q + "'");
    std::vector<double> v;
    for (std::size_t k = 1; k < cells.size(); ++k) v.push_back(parse_double(cells[k]));
    rows[c].push_back(std::move(v));
  }
  DataSet d;
  d.problem = problem;
  Observations* obs[3] = {&d.u, &d.f, &d.b};
  for (int c = 0; c < 3; ++c) {
    const auto n = static_cast<Index>(rows[c].size());
    obs[c]->x.resize(n, dim);
    obs[c]->y.resize(n);
    for (Index i = 0; i < n; ++i) {
      for (int k = 0; k < dim; ++k) obs[c]->x(i, k) = rows[c][i][k];
      obs[c]->y[i] = rows[c][i][dim];
    }
  }
  return d;
}

json dataset_metadata(const DataSet& d, const ScenarioConfig& sc, const ProblemSpec& p) {
  json j;
  j["problem"] = to_string(sc.problem);
  j["scenario"] = to_string(sc.scenario);
  j["counts"] = {{"u", d.u.size()}, {"f", d.f.size()}, {"b", d.b.size()}};
  j["noise"] = {{"u", d.noise_u}, {"f", d.noise_f}, {"b", d.noise_b}};
  j["seed"] = d.seed;
  j["dim"] = p.domain.dim();
  j["constants"] = {{"diffusion", p.diffusion}, {"lambda_true", p.lambda_true}, {"u0", p.u0},
                    {"mu0", p.mu0},             {"power_n", p.power_n},         {"pressure_c", p.pressure_c},
                    {"mu1", p.mu1},             {"height", p.height},           {"s3_base_coeff", p.s3_base_coeff}};
  return j;
}

DataSet read_dataset(const fs::path& csv, const fs::path& metadata) {
  json meta;
  try {
    meta = json::parse(read_file(metadata));
  } catch (const json::exception& e) {
    throw FormatError(metadata.string() + ": " + e.what());
  }
  DataSet d = parse_dataset_csv(read_file(csv), parse_problem_id(meta.at("problem").get<std::string>()));
  d.noise_u = meta.at("noise").at("u").get<double>();
  d.noise_f = meta.at("noise").at("f").get<double>();
  d.noise_b = meta.at("noise").at("b").get<double>();
  d.seed = meta.at("seed").get<std::uint64_t>();
  const json& counts = meta.at("counts");
  if (counts.at("u").get<Index>() != d.u.size() || counts.at("f").get<Index>() != d.f.size() ||
      counts.at("b").get<Index>() != d.b.size()) {
    throw FormatError("dataset: row counts differ from the metadata");
  }
  return d;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "iteration,phase,total,data_u,data_f,data_b,kl\n";
  for (const TraceRow& r : trace) {
    out += std::to_string(r.iteration) + "," + std::to_string(r.phase);
    for (double v : {r.total, r.data_u, r.data_f, r.data_b, r.kl}) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

std::string summary_csv(const Matrix& grid, const QuantitySummary& q, const Eigen::VectorXd* reference) {
  const int dim = static_cast<int>(grid.cols());
  if (q.mean.size() != grid.rows() || q.std.size() != grid.rows() ||
      (reference != nullptr && reference->size() != grid.rows())) {
    throw ConfigError("summary_csv: lengths do not match the grid");
  }
  std::string out = coord_header(dim) + ",mean,std" + (reference ? ",reference" : "") + "\n";
  for (Index i = 0; i < grid.rows(); ++i) {
    for (int k = 0; k < dim; ++k) out += format_double(grid(i, k)) + ",";
    out += format_double(q.mean[i]) + "," + format_double(q.std[i]);
    if (reference) out += "," + format_double((*reference)[i]);
    out += "\n";
  }
  return out;
}

SummaryTable parse_summary_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw FormatError("summary: empty file");
  const auto head = split(lines[0]);
  const bool has_ref = !head.empty() && head.back() == "reference";
  const int dim = static_cast<int>(head.size()) - 2 - (has_ref ? 1 : 0);
  if (dim < 1 || dim > 2 || head[dim] != "mean" || head[dim + 1] != "std") {
    throw FormatError("summary: expected header coord_1[,coord_2],mean,std[,reference]");
  }
  SummaryTable t;
  const auto n = static_cast<Index>(lines.size() - 1);
  t.grid.resize(n, dim);
  t.mean.resize(n);
  t.std.resize(n);
  if (has_ref) t.reference = Eigen::VectorXd(n);
  for (Index i = 0; i < n; ++i) {
    const auto cells = split(lines[i + 1]);
    if (cells.size() != head.size()) throw FormatError("summary: row " + std::to_string(i + 1) + " has the wrong width");
    for (int k = 0; k < dim; ++k) t.grid(i, k) = parse_double(cells[k]);
    t.mean[i] = parse_double(cells[dim]);
    t.std[i] = parse_double(cells[dim + 1]);
    if (has_ref) (*t.reference)[i] = parse_double(cells[dim + 2]);
  }
  return t;
}

std::string samples_csv(const Matrix& grid, const Matrix& samples) {
  if (samples.rows() != grid.rows()) throw ConfigError("samples_csv: rows do not match the grid");
  const int dim = static_cast<int>(grid.cols());
  std::string out = coord_header(dim);
  for (Index j = 0; j < samples.cols(); ++j) out += ",draw_" + std::to_string(j);
  out += "\n";
  for (Index i = 0; i < grid.rows(); ++i) {
    for (int k = 0; k < dim; ++k) out += (k ? "," : "") + format_double(grid(i, k));
    for (Index j = 0; j < samples.cols(); ++j) out += "," + format_double(samples(i, j));
    out += "\n";
  }
  return out;
}

Matrix parse_samples_csv(const std::string& text, Matrix& grid) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw FormatError("samples: empty file");
  const auto head = split(lines[0]);
  int dim = 0;
  while (dim < static_cast<int>(head.size()) && head[dim].rfind("coord_", 0) == 0) ++dim;
  if (dim < 1) throw FormatError("samples: missing coordinate columns");
  const auto n = static_cast<Index>(lines.size() - 1);
  const Index draws = static_cast<Index>(head.size()) - dim;
  grid.resize(n, dim);
  Matrix s(n, draws);
  for (Index i = 0; i < n; ++i) {
    const auto cells = split(lines[i + 1]);
    if (cells.size() != head.size()) throw FormatError("samples: row " + std::to_string(i + 1) + " has the wrong width");
    for (int k = 0; k < dim; ++k) grid(i, k) = parse_double(cells[k]);
    for (Index j = 0; j < draws; ++j) s(i, j) = parse_double(cells[dim + j]);
  }
  return s;
}

}  // namespace latcorr
