#include "tnn/app/checkpoint.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "tnn/error.hpp"

namespace tnn::app {
namespace {

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string reals(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ", ";
    out += real(v[k]);
  }
  return out + "]";
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

void write_state(std::ostringstream& os, const char* section, const TnnState& st) {
  os << "\n[" << section << "]\n";
  os << "d = " << st.d << "\n";
  os << "p = " << st.p << "\n";
  os << "hidden = [";
  for (std::size_t k = 0; k < st.arch.hidden.size(); ++k) os << (k ? ", " : "") << st.arch.hidden[k];
  os << "]\n";
  os << "mask = " << (st.mask ? "true" : "false") << "\n";
  for (int i = 0; i < st.d; ++i) {
    const DimDomain& dom = st.domain[i];
    os << "domain." << i << " = ";
    if (dom.bounded())
      os << "[" << real(dom.a) << ", " << real(dom.b) << "]\n";
    else
      os << "\"line\"\n";
  }
  os << "c = " << reals(st.c) << "\n";
  for (int i = 0; i < st.d; ++i) os << "theta." << i << " = " << reals(st.theta[i]) << "\n";
}

class Parser {
 public:
  Parser(std::string_view text, std::string origin) : origin_(std::move(origin)) {
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string line(text.substr(pos, end - pos));
      pos = end + 1;
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      if (line.front() == '[') {
        if (line.back() != ']') error(line_no, "malformed section header");
        section = line.substr(1, line.size() - 2);
        if (sections_.count(section)) error(line_no, "duplicate section [" + section + "]");
        sections_[section];
        continue;
      }
      const std::size_t eq = line.find(" = ");
      if (eq == std::string::npos) error(line_no, "expected \"key = value\"");
      const std::string key = line.substr(0, eq);
      if (sections_[section].count(key)) error(line_no, "duplicate key " + key);
      sections_[section][key] = {line.substr(eq + 3), line_no};
    }
  }

  bool has(const std::string& section) const { return sections_.count(section) > 0; }

  std::string raw(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) fail(ErrorKind::Validation, origin_ + ": missing section [" + section + "]");
    const auto k = s->second.find(key);
    if (k == s->second.end())
      fail(ErrorKind::Validation, origin_ + ": [" + section + "] missing key " + key);
    line_ = k->second.line;
    return k->second.text;
  }

  long long integer(const std::string& section, const std::string& key) const {
    const std::string v = raw(section, key);
    char* end = nullptr;
    errno = 0;
    const long long out = std::strtoll(v.c_str(), &end, 10);
    if (errno || end == v.c_str() || *end) error(line_, key + ": expected an integer");
    return out;
  }

  bool boolean(const std::string& section, const std::string& key) const {
    const std::string v = raw(section, key);
    if (v == "true") return true;
    if (v == "false") return false;
    error(line_, key + ": expected true or false");
  }

  double number(const std::string& text) const {
    char* end = nullptr;
    const double out = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end) error(line_, "malformed number \"" + text + "\"");
    return out;
  }

  double real(const std::string& section, const std::string& key) const { return number(raw(section, key)); }

  std::vector<double> reals(const std::string& section, const std::string& key) const {
    const std::string v = raw(section, key);
    if (v.size() < 2 || v.front() != '[' || v.back() != ']') error(line_, key + ": expected [ ... ]");
    std::vector<double> out;
    const std::string body = v.substr(1, v.size() - 2);
    std::size_t pos = 0;
    while (pos < body.size()) {
      std::size_t comma = body.find(", ", pos);
      if (comma == std::string::npos) comma = body.size();
      out.push_back(number(body.substr(pos, comma - pos)));
      pos = comma + 2;
    }
    return out;
  }

  std::string string(const std::string& section, const std::string& key) const {
    const std::string v = raw(section, key);
    if (v.size() < 2 || v.front() != '"' || v.back() != '"') error(line_, key + ": expected a quoted string");
    std::string out;
    for (std::size_t k = 1; k + 1 < v.size(); ++k) {
      if (v[k] == '\\' && k + 2 < v.size()) ++k;
      out += v[k];
    }
    return out;
  }

  [[noreturn]] void error(int line, const std::string& msg) const {
    fail(ErrorKind::Validation, origin_ + ":" + std::to_string(line) + ": " + msg);
  }

  TnnState state(const std::string& section) const {
    TnnState st;
    st.d = static_cast<int>(integer(section, "d"));
    st.p = static_cast<int>(integer(section, "p"));
    if (st.d < 1 || st.p < 1) error(line_, "[" + section + "] d and p must be positive");
    for (double w : reals(section, "hidden")) {
      if (w < 1 || w != static_cast<int>(w)) error(line_, "hidden: expected positive integer widths");
      st.arch.hidden.push_back(static_cast<int>(w));
    }
    st.arch.outputs = st.p;
    st.mask = boolean(section, "mask");
    for (int i = 0; i < st.d; ++i) {
      const std::string key = "domain." + std::to_string(i);
      if (raw(section, key) == "\"line\"") {
        st.domain.push_back({DimKind::Line, 0.0, 0.0});
      } else {
        const std::vector<double> ab = reals(section, key);
        if (ab.size() != 2) error(line_, key + ": expected [a, b] or \"line\"");
        st.domain.push_back({DimKind::Interval, ab[0], ab[1]});
      }
    }
    st.c = reals(section, "c");
    if (static_cast<int>(st.c.size()) != st.p) error(line_, "c: expected " + std::to_string(st.p) + " entries");
    for (int i = 0; i < st.d; ++i) {
      st.theta.push_back(reals(section, "theta." + std::to_string(i)));
      if (st.theta.back().size() != st.arch.param_count())
        error(line_, "theta." + std::to_string(i) + ": expected " + std::to_string(st.arch.param_count()) + " parameters");
    }
    return st;
  }

 private:
  struct Value {
    std::string text;
    int line = 0;
  };
  std::string origin_;
  std::map<std::string, std::map<std::string, Value>> sections_;
  mutable int line_ = 0;
};

}  // namespace

std::string format_checkpoint(const TrainerSnapshot& snap) {
  std::ostringstream os;
  os << "# tnn checkpoint\n";
  os << "version = " << kCheckpointVersion << "\n";
  os << "\n[run]\n";
  os << "seed = " << snap.seed << "\n";
  os << "phase = " << snap.phase << "\n";
  os << "phase_epoch = " << snap.phase_epoch << "\n";
  os << "epoch = " << snap.epoch << "\n";
  os << "finished = " << (snap.finished ? "true" : "false") << "\n";
  os << "rng = " << quoted(snap.rng) << "\n";
  write_state(os, "main", snap.main);
  if (snap.lift) write_state(os, "lift", *snap.lift);
  os << "\n[adam]\n";
  os << "t = " << snap.adam.t << "\n";
  os << "beta1 = " << real(snap.adam.beta1) << "\n";
  os << "beta2 = " << real(snap.adam.beta2) << "\n";
  os << "eps = " << real(snap.adam.eps) << "\n";
  os << "m = " << reals(snap.adam.m) << "\n";
  os << "v = " << reals(snap.adam.v) << "\n";
  os << "\n[lbfgs]\n";
  os << "memory = " << snap.lbfgs.memory << "\n";
  os << "fallback = " << (snap.lbfgs.fallback ? "true" : "false") << "\n";
  os << "pairs = " << snap.lbfgs.s.size() << "\n";
  for (std::size_t k = 0; k < snap.lbfgs.s.size(); ++k) {
    os << "s." << k << " = " << reals(snap.lbfgs.s[k]) << "\n";
    os << "y." << k << " = " << reals(snap.lbfgs.y[k]) << "\n";
  }
  return os.str();
}

TrainerSnapshot parse_checkpoint(std::string_view text, const std::string& origin) {
  const Parser p(text, origin);
  const long long version = p.integer("", "version");
  if (version != kCheckpointVersion)
    fail(ErrorKind::Validation, origin + ": unsupported checkpoint version " + std::to_string(version));
  TrainerSnapshot snap;
  snap.seed = static_cast<std::uint64_t>(std::stoull(p.raw("run", "seed")));
  snap.phase = static_cast<std::size_t>(p.integer("run", "phase"));
  snap.phase_epoch = p.integer("run", "phase_epoch");
  snap.epoch = p.integer("run", "epoch");
  snap.finished = p.boolean("run", "finished");
  snap.rng = p.string("run", "rng");
  snap.main = p.state("main");
  if (p.has("lift")) snap.lift = p.state("lift");
  snap.adam.t = p.integer("adam", "t");
  snap.adam.beta1 = p.real("adam", "beta1");
  snap.adam.beta2 = p.real("adam", "beta2");
  snap.adam.eps = p.real("adam", "eps");
  snap.adam.m = p.reals("adam", "m");
  snap.adam.v = p.reals("adam", "v");
  snap.lbfgs.memory = static_cast<int>(p.integer("lbfgs", "memory"));
  snap.lbfgs.fallback = p.boolean("lbfgs", "fallback");
  const long long pairs = p.integer("lbfgs", "pairs");
  for (long long k = 0; k < pairs; ++k) {
    snap.lbfgs.s.push_back(p.reals("lbfgs", "s." + std::to_string(k)));
    snap.lbfgs.y.push_back(p.reals("lbfgs", "y." + std::to_string(k)));
  }
  return snap;
}

void save_checkpoint(const std::string& path, const TrainerSnapshot& snap) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::InvalidArgument, tmp + ": cannot write checkpoint");
    out << format_checkpoint(snap);
    if (!out.flush()) fail(ErrorKind::InvalidArgument, tmp + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

TrainerSnapshot load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Validation, path + ": cannot open checkpoint");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str(), path);
}

}  // namespace tnn::app
