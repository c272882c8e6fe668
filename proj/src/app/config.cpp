#include "tnn/app/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tnn/app/registry.hpp"
#include "tnn/error.hpp"

namespace tnn::app {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Position of the key named by the last component of `path` in the source,
// found by walking the components in order.
int line_of(std::string_view text, const std::string& path) {
  std::size_t pos = 0;
  std::size_t found = std::string_view::npos;
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t end = path.find('.', start);
    if (end == std::string::npos) end = path.size();
    std::string key = path.substr(start, end - start);
    key = key.substr(0, key.find('['));
    if (!key.empty()) {
      const std::size_t at = text.find("\"" + key + "\"", pos);
      if (at == std::string_view::npos) break;
      found = pos = at;
    }
    start = end + 1;
  }
  if (found == std::string_view::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + found, '\n'));
}

class Reader {
 public:
  Reader(std::string_view text, std::string origin) : text_(text), origin_(std::move(origin)) {}

  [[noreturn]] void error(const std::string& path, const std::string& msg) const {
    const int line = line_of(text_, path);
    fail(ErrorKind::Validation,
         origin_ + ":" + (line > 0 ? std::to_string(line) : std::string("?")) + ": " + path + ": " + msg);
  }

  void only(const json& obj, const std::string& path, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) error(path, "expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!allowed.count(it.key())) error(join(path, it.key()), "unknown field");
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  const json& need(const json& obj, const std::string& path, const char* key) const {
    if (!obj.contains(key)) error(join(path, key), "missing required field");
    return obj.at(key);
  }

  double number(const json& v, const std::string& path) const {
    if (!v.is_number()) error(path, "expected a number");
    return v.get<double>();
  }

  long long integer(const json& v, const std::string& path, long long lo) const {
    if (!v.is_number_integer() || v.get<long long>() < lo)
      error(path, "expected an integer >= " + std::to_string(lo));
    return v.get<long long>();
  }

  std::string string(const json& v, const std::string& path) const {
    if (!v.is_string()) error(path, "expected a string");
    return v.get<std::string>();
  }

  Expr1D expr(const json& v, const std::string& path) const {
    if (v.is_number()) return Expr1D::number(v.get<double>());
    const std::string s = string(v, path);
    try {
      return parse(s);
    } catch (const Error& e) {
      error(path, e.what());
    }
  }

  SeparableFn separable(const json& v, const std::string& path, int d) const {
    if (v.is_number()) return SeparableFn::constant(d, v.get<double>());
    if (v.is_array()) {
      SeparableFn out(d);
      for (std::size_t k = 0; k < v.size(); ++k) append(out, separable(v[k], path + "[" + std::to_string(k) + "]", d));
      return out;
    }
    if (!v.is_object()) error(path, "expected a number, an array or an object");
    const double coef = v.contains("coef") ? number(v.at("coef"), join(path, "coef")) : 1.0;
    if (v.contains("product")) {
      only(v, path, {"product", "coef"});
      return SeparableFn::product(d, expr(v.at("product"), join(path, "product")), coef);
    }
    if (v.contains("sum")) {
      only(v, path, {"sum", "others", "coef"});
      const Expr1D others = v.contains("others") ? expr(v.at("others"), join(path, "others")) : Expr1D::number(1.0);
      return SeparableFn::sum(d, expr(v.at("sum"), join(path, "sum")), others, coef);
    }
    if (v.contains("terms")) {
      only(v, path, {"terms"});
      const json& terms = v.at("terms");
      if (!terms.is_array()) error(join(path, "terms"), "expected an array");
      SeparableFn out(d);
      for (std::size_t k = 0; k < terms.size(); ++k) {
        const std::string tp = join(path, "terms") + "[" + std::to_string(k) + "]";
        only(terms[k], tp, {"coef", "factors"});
        const double c = terms[k].contains("coef") ? number(terms[k].at("coef"), join(tp, "coef")) : 1.0;
        const json& fs = need(terms[k], tp, "factors");
        if (!fs.is_array() || static_cast<int>(fs.size()) != d)
          error(join(tp, "factors"), "expected " + std::to_string(d) + " factors");
        std::vector<Expr1D> factors;
        for (std::size_t i = 0; i < fs.size(); ++i)
          factors.push_back(expr(fs[i], join(tp, "factors") + "[" + std::to_string(i) + "]"));
        out.add_term(c, std::move(factors));
      }
      return out;
    }
    error(path, "expected one of \"product\", \"sum\" or \"terms\"");
  }

  static void append(SeparableFn& out, const SeparableFn& more) {
    for (int k = 0; k < more.rank(); ++k) out.add_term(more.coef(k), more.term(k));
  }

  std::vector<DimDomain> domain(const json& v, const std::string& path, int d) const {
    auto one = [&](const json& e, const std::string& p) {
      if (e.is_string()) {
        if (e.get<std::string>() != "line") error(p, "expected [a, b] or \"line\"");
        return DimDomain{DimKind::Line, 0.0, 0.0};
      }
      if (!e.is_array() || e.size() != 2) error(p, "expected [a, b] or \"line\"");
      return DimDomain{DimKind::Interval, number(e[0], p + "[0]"), number(e[1], p + "[1]")};
    };
    if (v.is_string() || (v.is_array() && v.size() == 2 && v[0].is_number()))
      return std::vector<DimDomain>(d, one(v, path));
    if (!v.is_array() || static_cast<int>(v.size()) != d)
      error(path, "expected one interval for all dimensions or one per dimension");
    std::vector<DimDomain> out;
    for (int i = 0; i < d; ++i) out.push_back(one(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

  Matrix diffusion(const json& v, const std::string& path, int d) const {
    Matrix a(d, d);
    if (v.is_string() && v.get<std::string>() == "identity") {
      for (int i = 0; i < d; ++i) a(i, i) = 1.0;
    } else if (v.is_number()) {
      for (int i = 0; i < d; ++i) a(i, i) = v.get<double>();
    } else {
      if (!v.is_array() || static_cast<int>(v.size()) != d) error(path, "expected \"identity\", a number or a d x d array");
      for (int s = 0; s < d; ++s) {
        if (!v[s].is_array() || static_cast<int>(v[s].size()) != d) error(path, "expected a d x d array");
        for (int t = 0; t < d; ++t) a(s, t) = number(v[s][t], path + "[" + std::to_string(s) + "][" + std::to_string(t) + "]");
      }
    }
    return a;
  }

  void grid(const json& v, const std::string& path, GridSpec& g) const {
    only(v, path, {"subintervals", "points", "hermite"});
    if (v.contains("subintervals")) g.subintervals = static_cast<int>(integer(v.at("subintervals"), join(path, "subintervals"), 1));
    if (v.contains("points")) g.points = static_cast<int>(integer(v.at("points"), join(path, "points"), 1));
    if (v.contains("hermite")) g.hermite = static_cast<int>(integer(v.at("hermite"), join(path, "hermite"), 1));
  }

  void network(const json& v, const std::string& path, NetworkSpec& n) const {
    only(v, path, {"hidden", "rank"});
    if (v.contains("rank")) n.rank = static_cast<int>(integer(v.at("rank"), join(path, "rank"), 1));
    if (v.contains("hidden")) {
      const json& h = v.at("hidden");
      if (!h.is_array() || h.empty()) error(join(path, "hidden"), "expected a non-empty array of widths");
      n.hidden.clear();
      for (std::size_t k = 0; k < h.size(); ++k)
        n.hidden.push_back(static_cast<int>(integer(h[k], join(path, "hidden") + "[" + std::to_string(k) + "]", 1)));
    }
  }

  void schedule(const json& v, const std::string& path, Schedule& s) const {
    only(v, path, {"pretrain_epochs", "pretrain_lr", "bd_adam_epochs", "bd_adam_lr", "bd_lbfgs_epochs",
                   "bd_lbfgs_lr", "adam_epochs", "adam_lr", "lbfgs_epochs", "lbfgs_lr", "gradient"});
    auto epochs = [&](const char* key, int& out) {
      if (v.contains(key)) out = static_cast<int>(integer(v.at(key), join(path, key), 0));
    };
    auto rate = [&](const char* key, double& out) {
      if (!v.contains(key)) return;
      out = number(v.at(key), join(path, key));
      if (!(out > 0.0)) error(join(path, key), "learning rates must be positive");
    };
    epochs("pretrain_epochs", s.pretrain_epochs);
    rate("pretrain_lr", s.pretrain_lr);
    epochs("bd_adam_epochs", s.bd_adam_epochs);
    rate("bd_adam_lr", s.bd_adam_lr);
    epochs("bd_lbfgs_epochs", s.bd_lbfgs_epochs);
    rate("bd_lbfgs_lr", s.bd_lbfgs_lr);
    epochs("adam_epochs", s.adam_epochs);
    rate("adam_lr", s.adam_lr);
    epochs("lbfgs_epochs", s.lbfgs_epochs);
    rate("lbfgs_lr", s.lbfgs_lr);
    if (v.contains("gradient")) {
      const std::string g = string(v.at("gradient"), join(path, "gradient"));
      if (g == "through-solve")
        s.through_solve = true;
      else if (g == "fixed-c")
        s.through_solve = false;
      else
        error(join(path, "gradient"), "expected \"through-solve\" or \"fixed-c\"");
    }
  }

  ProblemSpec problem(const json& v, const std::string& path) const {
    only(v, path, {"name", "kind", "dim", "domain", "operator", "f", "g", "flux", "exact", "grid", "network", "schedule"});
    ProblemSpec p;
    p.name = v.contains("name") ? string(v.at("name"), join(path, "name")) : "inline";
    const std::string kind = string(need(v, path, "kind"), join(path, "kind"));
    const auto k = parse_kind(kind);
    if (!k) error(join(path, "kind"), "unknown kind \"" + kind + "\"");
    p.kind = *k;
    p.d = static_cast<int>(integer(need(v, path, "dim"), join(path, "dim"), 1));
    const int d = p.d;
    p.domain = domain(need(v, path, "domain"), join(path, "domain"), d);

    p.op.A = Matrix(d, d);
    for (int i = 0; i < d; ++i) p.op.A(i, i) = 1.0;
    p.op.b = SeparableFn(d);
    if (v.contains("operator")) {
      const std::string op = join(path, "operator");
      const json& o = v.at("operator");
      only(o, op, {"A", "b"});
      if (o.contains("A")) p.op.A = diffusion(o.at("A"), join(op, "A"), d);
      if (o.contains("b")) p.op.b = separable(o.at("b"), join(op, "b"), d);
    }
    p.f = SeparableFn(d);
    p.g = SeparableFn(d);
    if (v.contains("f")) p.f = separable(v.at("f"), join(path, "f"), d);
    else if (p.kind != ProblemKind::Eigen) error(join(path, "f"), "missing required field");
    if (v.contains("g")) p.g = separable(v.at("g"), join(path, "g"), d);
    else if (p.kind == ProblemKind::NonhomoDirichlet) error(join(path, "g"), "missing required field");
    if (v.contains("flux")) {
      const std::string fp = join(path, "flux");
      const json& fl = v.at("flux");
      if (!fl.is_array()) error(fp, "expected an array of faces");
      for (std::size_t k = 0; k < fl.size(); ++k) {
        const std::string ep = fp + "[" + std::to_string(k) + "]";
        only(fl[k], ep, {"dim", "side", "g"});
        FaceData face;
        face.dim = static_cast<int>(integer(need(fl[k], ep, "dim"), join(ep, "dim"), 0));
        const std::string side = string(need(fl[k], ep, "side"), join(ep, "side"));
        if (side != "low" && side != "high") error(join(ep, "side"), "expected \"low\" or \"high\"");
        face.high = side == "high";
        face.g = separable(need(fl[k], ep, "g"), join(ep, "g"), d);
        p.flux.push_back(std::move(face));
      }
    }
    if (v.contains("exact")) {
      const std::string ep = join(path, "exact");
      const json& e = v.at("exact");
      only(e, ep, {"u", "lambda"});
      if (e.contains("u")) p.exact.u = separable(e.at("u"), join(ep, "u"), d);
      if (e.contains("lambda")) p.exact.lambda = number(e.at("lambda"), join(ep, "lambda"));
    }
    if (p.kind == ProblemKind::Eigen) p.schedule.pretrain_epochs = 2000;
    overrides(v, path, p);
    return p;
  }

  void overrides(const json& v, const std::string& path, ProblemSpec& p) const {
    if (v.contains("grid")) grid(v.at("grid"), join(path, "grid"), p.grid);
    if (v.contains("network")) network(v.at("network"), join(path, "network"), p.net);
    if (v.contains("schedule")) schedule(v.at("schedule"), join(path, "schedule"), p.schedule);
  }

  void validate(const ProblemSpec& p, const std::string& path) const {
    try {
      p.validate();
    } catch (const Error& e) {
      // "field: message" from the problem validation
      const std::string msg = e.what();
      const std::size_t colon = msg.find(": ");
      if (colon == std::string::npos) error(path, msg);
      error(join(path, msg.substr(0, colon)), msg.substr(colon + 2));
    }
  }

 private:
  std::string_view text_;
  std::string origin_;
};

ordered_json separable_json(const SeparableFn& fn) {
  ordered_json terms = ordered_json::array();
  for (int k = 0; k < fn.rank(); ++k) {
    ordered_json factors = ordered_json::array();
    for (int i = 0; i < fn.dim(); ++i) factors.push_back(fn.factor(k, i).str());
    terms.push_back({{"coef", fn.coef(k)}, {"factors", factors}});
  }
  return {{"terms", terms}};
}

}  // namespace

int default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

RunConfig parse_config(std::string_view text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + byte, '\n'));
    std::string what = e.what();
    const std::size_t cut = what.find("parse error");
    if (cut != std::string::npos) what = what.substr(cut);
    fail(ErrorKind::Validation, origin + ":" + std::to_string(line) + ": " + what);
  }
  const Reader r(text, origin);
  r.only(root, "", {"problem", "seed", "output", "checkpoint_every", "log_format", "threads", "energy", "grid",
                    "network", "schedule"});
  RunConfig cfg;
  cfg.threads = default_threads();
  const json& prob = r.need(root, "", "problem");
  if (prob.is_string()) {
    const std::string name = prob.get<std::string>();
    const auto p = lookup(name);
    if (!p) r.error("problem", "unknown registry problem \"" + name + "\"");
    cfg.problem = *p;
    r.overrides(root, "", cfg.problem);
  } else {
    for (const char* key : {"grid", "network", "schedule"})
      if (root.contains(key)) r.error(key, "only allowed next to a registry problem name; put it inside \"problem\"");
    cfg.problem = r.problem(prob, "problem");
  }
  r.validate(cfg.problem, "problem");

  if (root.contains("seed")) cfg.seed = static_cast<std::uint64_t>(r.integer(root.at("seed"), "seed", 0));
  if (root.contains("output")) cfg.output = r.string(root.at("output"), "output");
  if (root.contains("checkpoint_every")) cfg.checkpoint_every = r.integer(root.at("checkpoint_every"), "checkpoint_every", 0);
  if (root.contains("threads")) cfg.threads = static_cast<int>(r.integer(root.at("threads"), "threads", 1));
  if (root.contains("energy")) {
    if (!root.at("energy").is_boolean()) r.error("energy", "expected true or false");
    cfg.energy = root.at("energy").get<bool>();
  }
  if (root.contains("log_format")) {
    const std::string f = r.string(root.at("log_format"), "log_format");
    if (f == "csv")
      cfg.log_format = LogFormat::Csv;
    else if (f == "json-lines")
      cfg.log_format = LogFormat::JsonLines;
    else
      r.error("log_format", "expected \"csv\" or \"json-lines\"");
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Validation, path + ": cannot open configuration file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string echo_config(const RunConfig& cfg) {
  const ProblemSpec& p = cfg.problem;
  ordered_json dom = ordered_json::array();
  for (const DimDomain& d : p.domain) dom.push_back(d.bounded() ? ordered_json::array({d.a, d.b}) : ordered_json("line"));
  ordered_json a = ordered_json::array();
  for (int s = 0; s < p.d; ++s) {
    ordered_json row = ordered_json::array();
    for (int t = 0; t < p.d; ++t) row.push_back(p.op.A(s, t));
    a.push_back(row);
  }
  ordered_json prob = {{"name", p.name}, {"kind", to_string(p.kind)}, {"dim", p.d}, {"domain", dom},
               {"operator", {{"A", a}, {"b", separable_json(p.op.b)}}}};
  if (p.kind != ProblemKind::Eigen) prob["f"] = separable_json(p.f);
  if (p.kind == ProblemKind::NonhomoDirichlet) prob["g"] = separable_json(p.g);
  if (!p.flux.empty()) {
    ordered_json fl = ordered_json::array();
    for (const FaceData& f : p.flux) fl.push_back({{"dim", f.dim}, {"side", f.high ? "high" : "low"}, {"g", separable_json(f.g)}});
    prob["flux"] = fl;
  }
  if (p.exact.u || p.exact.lambda) {
    ordered_json e = ordered_json::object();
    if (p.exact.u) e["u"] = separable_json(*p.exact.u);
    if (p.exact.lambda) e["lambda"] = *p.exact.lambda;
    prob["exact"] = e;
  }
  prob["grid"] = {{"subintervals", p.grid.subintervals}, {"points", p.grid.points}, {"hermite", p.grid.hermite}};
  prob["network"] = {{"hidden", p.net.hidden}, {"rank", p.net.rank}};
  const Schedule& s = p.schedule;
  prob["schedule"] = {{"pretrain_epochs", s.pretrain_epochs}, {"pretrain_lr", s.pretrain_lr},
                      {"bd_adam_epochs", s.bd_adam_epochs},   {"bd_adam_lr", s.bd_adam_lr},
                      {"bd_lbfgs_epochs", s.bd_lbfgs_epochs}, {"bd_lbfgs_lr", s.bd_lbfgs_lr},
                      {"adam_epochs", s.adam_epochs},         {"adam_lr", s.adam_lr},
                      {"lbfgs_epochs", s.lbfgs_epochs},       {"lbfgs_lr", s.lbfgs_lr},
                      {"gradient", s.through_solve ? "through-solve" : "fixed-c"}};
  ordered_json root = {{"problem", prob},
               {"seed", cfg.seed},
               {"output", cfg.output},
               {"checkpoint_every", cfg.checkpoint_every},
               {"log_format", cfg.log_format == LogFormat::Csv ? "csv" : "json-lines"},
               {"threads", cfg.threads},
               {"energy", cfg.energy}};
  return root.dump(2) + "\n";
}

}  // namespace tnn::app
