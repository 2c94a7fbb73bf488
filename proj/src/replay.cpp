#include "qlp/replay.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <regex>
#include <sstream>

namespace qlp {

SamplerSpec SamplerSpec::uniform(double lo, double hi, int dimension) {
  SamplerSpec spec{Kind::uniform, lo, hi, dimension};
  spec.validate();
  return spec;
}

SamplerSpec SamplerSpec::gaussian(double mean, double variance, int dimension) {
  SamplerSpec spec{Kind::gaussian, mean, variance, dimension};
  spec.validate();
  return spec;
}

void SamplerSpec::validate() const {
  if (dimension < 1) throw std::invalid_argument("SamplerSpec: dimension must be positive");
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("SamplerSpec: parameters must be finite");
  }
  if (kind == Kind::uniform && !(a <= b)) {
    throw std::invalid_argument("SamplerSpec: uniform requires lo <= hi");
  }
  if (kind == Kind::gaussian && !(b >= 0.0)) {
    throw std::invalid_argument("SamplerSpec: gaussian requires variance >= 0");
  }
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view text, std::size_t line) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw BufferParseError(line, "cannot parse number '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::string SamplerSpec::describe() const {
  return std::string(kind == Kind::uniform ? "uniform(" : "gaussian(") +
         format_double(a) + "," + format_double(b) + ")";
}

SamplerSpec SamplerSpec::parse(const std::string& text, int dimension) {
  static const std::regex pattern(R"(^\s*(uniform|gaussian)\(([^,]+),([^)]+)\)\s*$)");
  std::smatch match;
  if (!std::regex_match(text, match, pattern)) {
    throw std::invalid_argument("cannot parse sampler '" + text +
                                "' (expected uniform(lo,hi) or gaussian(mean,variance))");
  }
  SamplerSpec spec;
  spec.kind = match[1] == "uniform" ? Kind::uniform : Kind::gaussian;
  spec.a = std::stod(match[2]);
  spec.b = std::stod(match[3]);
  spec.dimension = dimension;
  spec.validate();
  return spec;
}

ReplayBuffer::ReplayBuffer(std::vector<Transition> tuples, std::uint64_t seed,
                           SamplerSpec state_sampler, SamplerSpec action_sampler,
                           std::size_t resamples, bool anchored)
    : tuples_(std::move(tuples)),
      seed_(seed),
      state_sampler_(state_sampler),
      action_sampler_(action_sampler),
      resamples_(resamples),
      anchored_(anchored) {
  if (tuples_.empty()) throw std::invalid_argument("ReplayBuffer: no tuples");
  const auto n = tuples_.front().x.size();
  const auto m = tuples_.front().a.size();
  for (std::size_t b = 0; b < tuples_.size(); ++b) {
    const Transition& t = tuples_[b];
    if (t.x.size() != n || t.y.size() != n || t.a.size() != m) {
      throw std::invalid_argument("ReplayBuffer: tuple " + std::to_string(b) +
                                  " has inconsistent dimensions");
    }
    if (!(t.l >= 0.0)) {
      throw std::invalid_argument("ReplayBuffer: tuple " + std::to_string(b) +
                                  " has negative or NaN stage cost");
    }
  }
}

namespace {

class Sampler {
 public:
  explicit Sampler(const SamplerSpec& spec)
      : spec_(spec), uniform_(0.0, 1.0), normal_(0.0, 1.0) {}

  VectorXd draw(std::mt19937_64& rng) {
    VectorXd v(spec_.dimension);
    for (int i = 0; i < spec_.dimension; ++i) {
      if (spec_.kind == SamplerSpec::Kind::uniform) {
        v(i) = spec_.a + (spec_.b - spec_.a) * uniform_(rng);
      } else {
        v(i) = spec_.a + std::sqrt(spec_.b) * normal_(rng);
      }
    }
    return v;
  }

 private:
  SamplerSpec spec_;
  std::uniform_real_distribution<double> uniform_;
  std::normal_distribution<double> normal_;
};

}  // namespace

ReplayBuffer build_buffer(const Plant& plant, const StageCost& cost,
                          const SamplerSpec& state_sampler,
                          const SamplerSpec& action_sampler, std::size_t n,
                          std::uint64_t seed, bool anchor_origin) {
  state_sampler.validate();
  action_sampler.validate();
  if (state_sampler.dimension != plant.state_dim ||
      action_sampler.dimension != plant.input_dim) {
    throw std::invalid_argument("build_buffer: sampler dimensions do not match the plant");
  }
  if (n == 0) throw std::invalid_argument("build_buffer: N must be at least 1");

  std::mt19937_64 rng(seed);
  Sampler states(state_sampler);
  Sampler actions(action_sampler);
  std::vector<Transition> tuples;
  tuples.reserve(n);
  std::size_t resamples = 0;
  if (anchor_origin) {
    Transition t;
    t.x = VectorXd::Zero(plant.state_dim);
    t.a = VectorXd::Zero(plant.input_dim);
    t.y = plant(t.x, t.a);
    t.l = cost(t.x, t.a);
    if (!t.y.allFinite() || !std::isfinite(t.l)) {
      throw std::runtime_error("build_buffer: plant or cost is not finite at the origin");
    }
    tuples.push_back(std::move(t));
  }
  while (tuples.size() < n) {
    Transition t;
    t.x = states.draw(rng);
    t.a = actions.draw(rng);
    t.y = plant(t.x, t.a);
    t.l = t.y.allFinite() ? cost(t.x, t.a) : std::numeric_limits<double>::quiet_NaN();
    if (!t.y.allFinite() || !std::isfinite(t.l)) {
      if (++resamples > 10 * n) {
        throw std::runtime_error("build_buffer: more than 10N non-finite transitions");
      }
      continue;
    }
    tuples.push_back(std::move(t));
  }
  return ReplayBuffer(std::move(tuples), seed, state_sampler, action_sampler, resamples,
                      anchor_origin);
}

BufferParseError::BufferParseError(std::size_t line, const std::string& what)
    : std::runtime_error("buffer CSV line " + std::to_string(line) + ": " + what),
      line_(line) {}

std::string buffer_csv_header(int state_dim, int input_dim) {
  std::string header = "index";
  for (int i = 1; i <= state_dim; ++i) header += ",x" + std::to_string(i);
  for (int i = 1; i <= input_dim; ++i) header += ",a" + std::to_string(i);
  for (int i = 1; i <= state_dim; ++i) header += ",y" + std::to_string(i);
  return header + ",l";
}

void write_buffer_csv(std::ostream& out, const ReplayBuffer& buffer) {
  out << "# qlp-buffer seed=" << buffer.seed() << " resamples=" << buffer.resamples()
      << " state=" << buffer.state_sampler().describe()
      << " action=" << buffer.action_sampler().describe()
      << " anchor=" << (buffer.anchored() ? "origin" : "none") << "\n";
  out << buffer_csv_header(buffer.state_dim(), buffer.input_dim()) << "\n";
  for (std::size_t b = 0; b < buffer.size(); ++b) {
    const Transition& t = buffer[b];
    out << b;
    for (double v : t.x) out << ',' << format_double(v);
    for (double v : t.a) out << ',' << format_double(v);
    for (double v : t.y) out << ',' << format_double(v);
    out << ',' << format_double(t.l) << "\n";
  }
}

void write_buffer_csv(const std::string& path, const ReplayBuffer& buffer) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_buffer_csv(out, buffer);
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

}  // namespace

ReplayBuffer read_buffer_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t seed = 0;
  std::size_t resamples = 0;
  std::string state_text;
  std::string action_text;
  bool anchored = false;
  bool have_meta = false;

  // Metadata comment, then the header.
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# qlp-buffer", 0) == 0) {
      static const std::regex meta(
          R"(# qlp-buffer seed=(\d+) resamples=(\d+) state=(\S+) action=(\S+)(?: anchor=(origin|none))?)");
      std::smatch match;
      if (!std::regex_match(line, match, meta)) {
        throw BufferParseError(line_no, "malformed metadata line");
      }
      seed = std::stoull(match[1]);
      resamples = std::stoull(match[2]);
      state_text = match[3];
      action_text = match[4];
      anchored = match[5] == "origin";
      have_meta = true;
      continue;
    }
    if (!line.empty() && line.front() == '#') continue;
    break;
  }
  if (line_no == 0 || line.empty() || line.front() == '#') {
    throw BufferParseError(line_no == 0 ? 1 : line_no, "empty file, expected header");
  }

  // The header determines n and m.
  const auto columns = split(line, ',');
  int n = 0;
  int m = 0;
  for (const auto& c : columns) {
    if (!c.empty() && c.front() == 'x') ++n;
    if (!c.empty() && c.front() == 'a') ++m;
  }
  if (n < 1 || m < 1 || line != buffer_csv_header(n, m)) {
    throw BufferParseError(line_no, "header does not match schema "
                                    "'index,x1..xn,a1..am,y1..yn,l' (got '" +
                                        line + "')");
  }
  const std::size_t expected = 2 * static_cast<std::size_t>(n) + m + 2;

  std::vector<Transition> tuples;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != expected) {
      throw BufferParseError(line_no, "expected " + std::to_string(expected) +
                                          " columns (" + buffer_csv_header(n, m) +
                                          "), got " + std::to_string(fields.size()));
    }
    Transition t;
    t.x.resize(n);
    t.a.resize(m);
    t.y.resize(n);
    std::size_t k = 1;
    for (int i = 0; i < n; ++i) t.x(i) = parse_double(fields[k++], line_no);
    for (int i = 0; i < m; ++i) t.a(i) = parse_double(fields[k++], line_no);
    for (int i = 0; i < n; ++i) t.y(i) = parse_double(fields[k++], line_no);
    t.l = parse_double(fields[k], line_no);
    if (!(t.l >= 0.0)) throw BufferParseError(line_no, "negative stage cost");
    tuples.push_back(std::move(t));
  }
  if (tuples.empty()) throw BufferParseError(line_no, "no data rows");

  SamplerSpec state_sampler = SamplerSpec::uniform(0, 0, n);
  SamplerSpec action_sampler = SamplerSpec::gaussian(0, 0, m);
  if (have_meta) {
    state_sampler = SamplerSpec::parse(state_text, n);
    action_sampler = SamplerSpec::parse(action_text, m);
  }
  return ReplayBuffer(std::move(tuples), seed, state_sampler, action_sampler, resamples,
                      anchored);
}

ReplayBuffer read_buffer_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_buffer_csv(in);
}

}  // namespace qlp
