#include "cfps/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "cfps/realization.hpp"
#include "cfps/rng.hpp"
#include "json.hpp"

namespace cfps {

using ojson = nlohmann::ordered_json;

// --- labels ------------------------------------------------------------------------

LabelStrategy label_strategy_from_string(std::string_view name) {
  if (name == "all_after_error") return LabelStrategy::AllAfterError;
  throw std::invalid_argument("unknown label strategy: " + std::string(name));
}

std::string_view to_string(LabelStrategy) { return "all_after_error"; }

StepLabels label_steps(const Instance& inst, LabelStrategy) {
  StepLabels out;
  for (const Step& s : inst.correct.steps) out.correct.push_back({s.index, true});
  for (std::size_t t = 0; t < inst.erroneous.steps.size(); ++t) {
    const int idx = static_cast<int>(t) + 1;
    out.erroneous.push_back({idx, idx < inst.erroneous.k});
  }
  return out;
}

// --- records -----------------------------------------------------------------------

namespace {

ojson step_json(const Step& s) {
  ojson j;
  j["index"] = s.index;
  ojson sup = ojson::array();
  for (const auto& l : s.supports) sup.push_back(to_string(l));
  j["supports"] = std::move(sup);
  j["rule"] = render_rule(s.rule);
  j["conclusion"] = to_string(s.conclusion);
  return j;
}

ojson label_json(const std::vector<StepLabel>& ls) {
  ojson a = ojson::array();
  for (const auto& l : ls) a.push_back(l.valid ? "valid" : "invalid");
  return a;
}

ojson literal_list(const std::vector<Literal>& ls) {
  ojson a = ojson::array();
  for (const auto& l : ls) a.push_back(to_string(l));
  return a;
}

ojson nl_json(const NlRecord& nl) {
  ojson j;
  j["mode"] = nl.mode;
  j["goal"] = nl.goal;
  j["base_facts"] = nl.base_facts;
  j["rules"] = nl.rules;
  j["correct_steps"] = nl.correct_steps;
  j["erroneous_steps"] = nl.erroneous_steps;
  ojson preds = ojson::object();
  for (const auto& [f, e] : nl.predicates) preds[to_string(f)] = {{"predicate", e.predicate}, {"true", e.positive}, {"false", e.negative}};
  j["predicates"] = std::move(preds);
  return j;
}

// Read-side helpers; all failures become MalformedRecord with the line number.
struct Reader {
  std::size_t line;

  [[noreturn]] void fail(const std::string& what) const { throw MalformedRecord(what, line); }

  const ojson& field(const ojson& j, const char* key) const {
    auto it = j.find(key);
    if (it == j.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }
  std::string str(const ojson& j, const char* key) const {
    const ojson& v = field(j, key);
    if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  }
  std::vector<std::string> strs(const ojson& j, const char* key) const {
    const ojson& v = field(j, key);
    if (!v.is_array()) fail(std::string("field '") + key + "' must be an array");
    std::vector<std::string> out;
    for (const auto& x : v) {
      if (!x.is_string()) fail(std::string("field '") + key + "' must hold strings");
      out.push_back(x.get<std::string>());
    }
    return out;
  }
  Literal lit(const std::string& s) const {
    try {
      return parse_literal(s);
    } catch (const ParseError& e) {
      fail("bad literal '" + s + "': " + e.what());
    }
  }
  Rule rule(const std::string& s) const {
    try {
      return parse_rule(s);
    } catch (const ParseError& e) {
      fail("bad rule '" + s + "': " + e.what());
    }
  }
  std::vector<Literal> lits(const ojson& j, const char* key) const {
    std::vector<Literal> out;
    for (const auto& s : strs(j, key)) out.push_back(lit(s));
    return out;
  }
  std::vector<Step> steps(const ojson& chain) const {
    const ojson& arr = field(chain, "steps");
    if (!arr.is_array()) fail("'steps' must be an array");
    std::vector<Step> out;
    for (const auto& sj : arr) {
      const ojson& idx = field(sj, "index");
      if (!idx.is_number_integer()) fail("step index must be an integer");
      out.push_back(Step{idx.get<int>(), lits(sj, "supports"), rule(str(sj, "rule")), lit(str(sj, "conclusion"))});
    }
    return out;
  }
};

std::string dump(const ojson& j) { return j.dump(-1, ' ', false, ojson::error_handler_t::strict); }

ojson parse_line(const std::string& record, std::size_t line) {
  try {
    ojson j = ojson::parse(record);
    if (!j.is_object()) throw MalformedRecord("record is not a JSON object", line);
    return j;
  } catch (const ojson::parse_error& e) {
    throw MalformedRecord(std::string("invalid JSON: ") + e.what(), line);
  }
}

void check_version(const ojson& j, std::size_t line) {
  auto it = j.find("schema_version");
  if (it == j.end() || !it->is_number_integer()) throw MalformedRecord("missing schema_version", line);
  const int v = it->get<int>();
  if (v != kSchemaVersion)
    throw SchemaMismatch("schema_version " + std::to_string(v) + " (supported: " + std::to_string(kSchemaVersion) + ")",
                         line);
}

const char* const kInstanceFields[] = {"schema_version", "id",        "seed",   "context", "goal",  "base_facts",
                                       "rules",          "correct",   "erroneous", "labels", "nl",   "stats"};

}  // namespace

std::string serialize(const Instance& inst) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["id"] = inst.id;
  j["seed"] = inst.seed;
  j["context"] = {{"name", inst.context.name}, {"background", inst.context.background}};
  j["goal"] = to_string(inst.correct.goal);
  j["base_facts"] = literal_list(inst.correct.base_facts);
  ojson rules = ojson::array();
  for (const auto& r : inst.correct.rules) rules.push_back(render_rule(r));
  j["rules"] = std::move(rules);

  ojson cs = ojson::array();
  for (const auto& s : inst.correct.steps) cs.push_back(step_json(s));
  j["correct"] = {{"steps", std::move(cs)}};

  ojson es = ojson::array();
  for (const auto& s : inst.erroneous.steps) es.push_back(step_json(s));
  ojson err;
  err["steps"] = std::move(es);
  err["k"] = inst.erroneous.k;
  err["error_type"] = to_string(inst.erroneous.error_type);
  err["error_group"] = to_string(group_of(inst.erroneous.error_type));
  err["dropped"] = inst.erroneous.dropped;
  j["erroneous"] = std::move(err);

  const StepLabels labels = label_steps(inst);
  j["labels"] = {{"strategy", "all_after_error"},
                 {"correct", label_json(labels.correct)},
                 {"erroneous", label_json(labels.erroneous)}};
  if (inst.nl) j["nl"] = nl_json(*inst.nl);
  j["stats"] = {{"correct_steps", inst.correct.steps.size()}, {"erroneous_steps", inst.erroneous.steps.size()}};

  for (const auto& [key, raw] : inst.extensions) j[key] = ojson::parse(raw);
  return dump(j);
}

Instance deserialize(const std::string& record, std::size_t line) {
  const ojson j = parse_line(record, line);
  check_version(j, line);
  Reader rd{line};
  try {
    Instance inst;
    inst.id = rd.str(j, "id");
    const ojson& seed = rd.field(j, "seed");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
      rd.fail("seed must be a non-negative integer");
    inst.seed = seed.get<std::uint64_t>();
    const ojson& ctx = rd.field(j, "context");
    inst.context = {rd.str(ctx, "name"), rd.str(ctx, "background")};

    inst.correct.goal = rd.lit(rd.str(j, "goal"));
    inst.correct.base_facts = rd.lits(j, "base_facts");
    for (const auto& r : rd.strs(j, "rules")) inst.correct.rules.push_back(rd.rule(r));
    inst.correct.steps = rd.steps(rd.field(j, "correct"));

    const ojson& err = rd.field(j, "erroneous");
    inst.erroneous.steps = rd.steps(err);
    const ojson& k = rd.field(err, "k");
    if (!k.is_number_integer()) rd.fail("k must be an integer");
    inst.erroneous.k = k.get<int>();
    const auto et = error_type_from_string(rd.str(err, "error_type"));
    if (!et) rd.fail("unknown error_type '" + rd.str(err, "error_type") + "'");
    inst.erroneous.error_type = *et;
    if (auto it = err.find("dropped"); it != err.end()) {
      if (!it->is_array()) rd.fail("'dropped' must be an array");
      for (const auto& d : *it) {
        if (!d.is_number_integer()) rd.fail("'dropped' must hold integers");
        inst.erroneous.dropped.push_back(d.get<int>());
      }
    }
    inst.erroneous.state_log = counterfactual_states(inst.correct.base_facts, inst.erroneous.steps);

    if (auto it = j.find("nl"); it != j.end()) {
      NlRecord nl;
      nl.mode = rd.str(*it, "mode");
      nl.goal = rd.str(*it, "goal");
      nl.base_facts = rd.strs(*it, "base_facts");
      nl.rules = rd.strs(*it, "rules");
      nl.correct_steps = rd.strs(*it, "correct_steps");
      nl.erroneous_steps = rd.strs(*it, "erroneous_steps");
      const ojson& preds = rd.field(*it, "predicates");
      if (!preds.is_object()) rd.fail("'predicates' must be an object");
      for (const auto& [sym, e] : preds.items()) {
        const Literal l = rd.lit(sym + "=True");
        nl.predicates[l.fact] = {rd.str(e, "predicate"), rd.str(e, "true"), rd.str(e, "false")};
      }
      inst.nl = std::move(nl);
    }

    for (const auto& [key, value] : j.items()) {
      if (std::find(std::begin(kInstanceFields), std::end(kInstanceFields), key) == std::end(kInstanceFields))
        inst.extensions[key] = dump(value);
    }
    return inst;
  } catch (const ojson::exception& e) {
    rd.fail(e.what());
  }
}

std::optional<StepLabels> stored_labels(const std::string& record, std::size_t line) {
  const ojson j = parse_line(record, line);
  auto it = j.find("labels");
  if (it == j.end()) return std::nullopt;
  Reader rd{line};
  StepLabels out;
  auto read = [&](const char* key, std::vector<StepLabel>& dst) {
    int idx = 0;
    for (const auto& s : rd.strs(*it, key)) {
      if (s != "valid" && s != "invalid") rd.fail("label must be valid or invalid");
      dst.push_back({++idx, s == "valid"});
    }
  };
  read("correct", out.correct);
  read("erroneous", out.erroneous);
  return out;
}

std::string serialize_header(const CorpusHeader& h) {
  ojson j;
  j["record"] = "header";
  j["schema_version"] = h.schema_version;
  ojson cfg = ojson::object();
  for (const auto& [k, v] : h.config) cfg[k] = v;
  j["config"] = std::move(cfg);
  j["config_digest"] = h.config_digest;
  for (const auto& [key, raw] : h.extensions) j[key] = ojson::parse(raw);
  return dump(j);
}

namespace {

bool is_header(const ojson& j) {
  auto it = j.find("record");
  return it != j.end() && it->is_string() && it->get<std::string>() == "header";
}

CorpusHeader read_header(const ojson& j, std::size_t line) {
  check_version(j, line);
  Reader rd{line};
  CorpusHeader h;
  const ojson& cfg = rd.field(j, "config");
  if (!cfg.is_object()) rd.fail("'config' must be an object");
  for (const auto& [k, v] : cfg.items()) {
    if (!v.is_string()) rd.fail("config values must be strings");
    h.config.emplace_back(k, v.get<std::string>());
  }
  h.config_digest = rd.str(j, "config_digest");
  for (const auto& [key, value] : j.items())
    if (key != "record" && key != "schema_version" && key != "config" && key != "config_digest")
      h.extensions[key] = dump(value);
  return h;
}

}  // namespace

Corpus read_corpus(std::istream& in) {
  Corpus c;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const ojson j = parse_line(line, n);
    if (is_header(j)) {
      if (c.header || !c.instances.empty()) throw MalformedRecord("unexpected header record", n);
      c.header = read_header(j, n);
      continue;
    }
    c.instances.push_back(deserialize(line, n));
  }
  return c;
}

Corpus read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  if (corpus.header) out << serialize_header(*corpus.header) << '\n';
  for (const auto& inst : corpus.instances) out << serialize(inst) << '\n';
}

std::string split_of(const std::string& id, std::uint64_t seed, double train_fraction, double val_fraction) {
  const double u = static_cast<double>(mix64(fnv1a64(id) ^ mix64(seed)) >> 11) * 0x1.0p-53;
  if (u < train_fraction) return "train";
  if (u < train_fraction + val_fraction) return "val";
  return "test";
}

// --- configuration -------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw std::invalid_argument("bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("bad boolean for " + key + ": '" + v + "'");
}

std::map<ErrorType, double> uniform_weights() {
  std::map<ErrorType, double> w;
  for (ErrorType e : kAllErrorTypes) w[e] = 1.0;
  return w;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_flat_kv(std::istream& in, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(source + ":" + std::to_string(n) + ": expected key = value");
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw std::invalid_argument(source + ":" + std::to_string(n) + ": empty key");
    out.emplace_back(std::move(key), trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_flat_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  return parse_flat_kv(in, path);
}

std::map<ErrorType, double> parse_weights(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::map<ErrorType, double> w;
  for (ErrorType e : kAllErrorTypes) w[e] = 0.0;
  for (const auto& [k, v] : kv) {
    const auto e = error_type_from_string(k);
    if (!e) throw std::invalid_argument("unknown error type in weights: " + k);
    const double x = parse_number<double>(k, v);
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("weight must be finite and >= 0: " + k);
    w[*e] = x;
  }
  return w;
}

void CorpusConfig::set(const std::string& key, const std::string& value) {
  auto as_int = [&] { return parse_number<int>(key, value); };
  auto as_double = [&] { return parse_number<double>(key, value); };
  if (key == "count") total_count = parse_number<std::uint64_t>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "weights") {
    if (value == "default") weights = default_error_weights();
    else if (value == "uniform") weights = uniform_weights();
    else weights = parse_weights(read_flat_kv_file(value));
  } else if (key.starts_with("weight.")) {
    const auto e = error_type_from_string(key.substr(7));
    if (!e) throw std::invalid_argument("unknown error type: " + key);
    weights[*e] = as_double();
  } else if (key == "min_steps") synthesis.min_steps = as_int();
  else if (key == "max_steps") synthesis.max_steps = as_int();
  else if (key == "max_facts") synthesis.max_facts = parse_number<std::size_t>(key, value);
  else if (key == "synthesis_attempts") synthesis.max_attempts = as_int();
  else if (key == "p_fresh") synthesis.p_fresh = as_double();
  else if (key == "distractor_rules") synthesis.distractor_rules = as_int();
  else if (key == "min_useful_steps") synthesis.min_useful_steps = as_int();
  else if (key == "p_extra_support") synthesis.p_extra_support = as_double();
  else if (key.starts_with("template_weight.")) {
    const auto t = template_from_string(key.substr(16));
    if (!t) throw std::invalid_argument("unknown template: " + key);
    synthesis.template_weights[*t] = as_double();
  } else if (key == "k_min") k_min = as_int();
  else if (key == "k_tail") k_tail = as_int();
  else if (key == "counterfactual_attempts") counterfactual_attempts = as_int();
  else if (key == "allow_step_drop") allow_step_drop = parse_bool(key, value);
  else if (key == "max_chains_per_instance") max_chains_per_instance = as_int();
  else if (key == "workers") workers = as_int();
  else if (key == "out") output_path = value;
  else if (key == "schema_version") schema_version = as_int();
  else throw std::invalid_argument("unknown config key: " + key);
}

void CorpusConfig::validate() const {
  synthesis.validate();
  if (schema_version != kSchemaVersion)
    throw std::invalid_argument("schema_version " + std::to_string(schema_version) + " is not supported");
  double mass = 0;
  for (const auto& [e, w] : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("error weights must be finite and >= 0");
    mass += w;
  }
  if (!(mass > 0.0)) throw std::invalid_argument("error weights have zero total mass");
  if (k_min < 1) throw std::invalid_argument("k_min must be >= 1");
  if (k_tail < 0) throw std::invalid_argument("k_tail must be >= 0");
  if (counterfactual_attempts < 1) throw std::invalid_argument("counterfactual_attempts must be >= 1");
  if (max_chains_per_instance < 1) throw std::invalid_argument("max_chains_per_instance must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

std::vector<std::pair<std::string, std::string>> CorpusConfig::to_kv() const {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("schema_version", std::to_string(schema_version));
  kv.emplace_back("count", std::to_string(total_count));
  kv.emplace_back("seed", std::to_string(seed));
  for (ErrorType e : kAllErrorTypes) {
    auto it = weights.find(e);
    kv.emplace_back("weight." + std::string(to_string(e)), fmt_double(it == weights.end() ? 0.0 : it->second));
  }
  kv.emplace_back("min_steps", std::to_string(synthesis.min_steps));
  kv.emplace_back("max_steps", std::to_string(synthesis.max_steps));
  kv.emplace_back("max_facts", std::to_string(synthesis.max_facts));
  kv.emplace_back("synthesis_attempts", std::to_string(synthesis.max_attempts));
  kv.emplace_back("p_fresh", fmt_double(synthesis.p_fresh));
  kv.emplace_back("distractor_rules", std::to_string(synthesis.distractor_rules));
  kv.emplace_back("min_useful_steps", std::to_string(synthesis.min_useful_steps));
  kv.emplace_back("p_extra_support", fmt_double(synthesis.p_extra_support));
  for (RuleTemplate t : kAllTemplates) {
    auto it = synthesis.template_weights.find(t);
    kv.emplace_back("template_weight." + std::string(to_string(t)),
                    fmt_double(it == synthesis.template_weights.end() ? 0.0 : it->second));
  }
  kv.emplace_back("k_min", std::to_string(k_min));
  kv.emplace_back("k_tail", std::to_string(k_tail));
  kv.emplace_back("counterfactual_attempts", std::to_string(counterfactual_attempts));
  kv.emplace_back("allow_step_drop", allow_step_drop ? "true" : "false");
  kv.emplace_back("max_chains_per_instance", std::to_string(max_chains_per_instance));
  return kv;
}

std::string digest_of(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::uint64_t h = fnv1a64("");
  for (const auto& [k, v] : kv) h = fnv1a64(k + "=" + v + "\n", h);
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string CorpusConfig::digest() const { return digest_of(to_kv()); }

CounterfactualConfig CorpusConfig::counterfactual() const {
  CounterfactualConfig c;
  c.weights = weights;
  c.k_min = k_min;
  c.k_tail = k_tail;
  c.max_attempts = counterfactual_attempts;
  c.allow_step_drop = allow_step_drop;
  c.min_steps = synthesis.min_steps;
  c.max_steps = synthesis.max_steps;
  return c;
}

// --- stats ---------------------------------------------------------------------------

std::map<ErrorType, double> CorpusStats::shares() const {
  std::map<ErrorType, double> s;
  for (ErrorType e : kAllErrorTypes) {
    auto it = accepted.find(e);
    s[e] = total ? static_cast<double>(it == accepted.end() ? 0 : it->second) / static_cast<double>(total) : 0.0;
  }
  return s;
}

std::string CorpusStats::render(int schema_version, const std::string& config_digest) const {
  std::ostringstream os;
  os << "schema_version=" << schema_version << "\n";
  os << "config_digest=" << config_digest << "\n";
  os << "total=" << total << "\n";
  const auto sh = shares();
  for (ErrorType e : kAllErrorTypes) {
    auto it = accepted.find(e);
    os << "accepted." << to_string(e) << "=" << (it == accepted.end() ? 0 : it->second) << "\n";
  }
  for (ErrorType e : kAllErrorTypes) os << "share." << to_string(e) << "=" << fmt_double(sh.at(e)) << "\n";
  os << "counterfactual_attempts=" << rejections.attempts << "\n";
  for (RejectReason r : kAllRejectReasons) {
    auto it = rejections.rejected.find(r);
    os << "rejected." << to_string(r) << "=" << (it == rejections.rejected.end() ? 0 : it->second) << "\n";
  }
  os << "chains_synthesized=" << chains_synthesized << "\n";
  os << "synthesis_exhausted=" << synthesis_exhausted << "\n";
  os << "mean_correct_steps=" << fmt_double(mean_correct_steps) << "\n";
  os << "mean_erroneous_steps=" << fmt_double(mean_erroneous_steps) << "\n";
  os << "templates_used=";
  bool first = true;
  for (RuleTemplate t : templates_used) {
    os << (first ? "" : ",") << to_string(t);
    first = false;
  }
  os << "\n";
  return os.str();
}

CorpusStats summarize(const std::vector<Instance>& instances) {
  CorpusStats s;
  std::uint64_t cs = 0, es = 0;
  for (const auto& inst : instances) {
    ++s.total;
    ++s.accepted[inst.error_type()];
    cs += inst.correct.steps.size();
    es += inst.erroneous.steps.size();
    for (const auto& st : inst.correct.steps) s.templates_used.insert(st.rule.templ());
  }
  if (s.total) {
    s.mean_correct_steps = static_cast<double>(cs) / static_cast<double>(s.total);
    s.mean_erroneous_steps = static_cast<double>(es) / static_cast<double>(s.total);
  }
  return s;
}

// --- generation ----------------------------------------------------------------------

std::string instance_id(std::uint64_t index) {
  std::ostringstream os;
  os << "cf-" << std::setw(6) << std::setfill('0') << index;
  return os.str();
}

std::optional<Instance> generate_instance(const CorpusConfig& cfg, std::uint64_t index, CorpusStats& stats) {
  const std::uint64_t seed = derive_seed(cfg.seed, index);
  Rng rng(seed);

  // target type first, so shares follow the weights rather than applicability
  std::vector<ErrorType> types;
  std::vector<double> w;
  for (ErrorType e : kAllErrorTypes) {
    auto it = cfg.weights.find(e);
    if (it != cfg.weights.end() && it->second > 0.0) {
      types.push_back(e);
      w.push_back(it->second);
    }
  }
  const ErrorType target = types[rng.categorical(w)];
  const CounterfactualConfig cf = cfg.counterfactual();

  for (int attempt = 0; attempt < cfg.max_chains_per_instance; ++attempt) {
    const std::uint64_t chain_seed = rng.next();
    const std::uint64_t cf_seed = rng.next();
    CorrectChain chain;
    try {
      chain = synthesize_chain(cfg.synthesis, chain_seed);
    } catch (const SynthesisExhausted&) {
      ++stats.synthesis_exhausted;
      continue;
    }
    ++stats.chains_synthesized;
    auto res = build_counterfactual(chain, cf, cf_seed, target);
    stats.rejections.merge(res.stats);
    if (!res.instance) continue;
    Instance inst = std::move(*res.instance);
    inst.id = instance_id(index);
    inst.seed = seed;
    inst.context = make_context(derive_seed(seed, 0xc0de));
    return inst;
  }
  return std::nullopt;
}

CorpusStats generate_corpus(const CorpusConfig& cfg, std::ostream& out) {
  cfg.validate();
  const std::uint64_t n = cfg.total_count;
  std::vector<std::optional<Instance>> results(n);
  std::vector<CorpusStats> partial(static_cast<std::size_t>(cfg.workers));
  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> exhausted{false};

  auto work = [&](std::size_t w) {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= n || exhausted.load()) return;
      results[i] = generate_instance(cfg, i, partial[w]);
      if (!results[i]) exhausted.store(true);
    }
  };
  if (cfg.workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < cfg.workers; ++w) pool.emplace_back(work, static_cast<std::size_t>(w));
    for (auto& t : pool) t.join();
  }

  std::vector<Instance> done;
  done.reserve(n);
  for (auto& r : results)
    if (r) done.push_back(std::move(*r));
  CorpusStats stats = summarize(done);
  for (const auto& p : partial) {
    stats.rejections.merge(p.rejections);
    stats.chains_synthesized += p.chains_synthesized;
    stats.synthesis_exhausted += p.synthesis_exhausted;
  }
  if (exhausted.load())
    throw CorpusExhausted("no instance accepted within " + std::to_string(cfg.max_chains_per_instance) +
                              " chains for some index",
                          stats);

  CorpusHeader h;
  h.config = cfg.to_kv();
  h.config_digest = cfg.digest();
  out << serialize_header(h) << '\n';
  for (const auto& inst : done) out << serialize(inst) << '\n';
  return stats;
}

}  // namespace cfps
