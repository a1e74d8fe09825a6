#include "cfps/realization.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>

#include "cfps/rng.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cfps {

using ojson = nlohmann::ordered_json;

NlMode nl_mode_from_string(std::string_view s) {
  if (s == "clean") return NlMode::Clean;
  if (s == "annotated") return NlMode::Annotated;
  throw std::invalid_argument("unknown nl mode: " + std::string(s));
}

std::string_view to_string(NlMode m) { return m == NlMode::Clean ? "clean" : "annotated"; }

namespace {

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

const std::vector<std::string> kNames = {"Mara",  "Tobias", "Ines",  "Kwame", "Solveig", "Rafael", "Yuki",
                                         "Priya", "Anselm", "Leota", "Dmitri", "Carmen", "Oisin",  "Hana"};
const std::vector<std::string> kTowns = {"a fishing town on a windy coast", "a hill village with one bakery",
                                         "a canal district full of narrow houses", "a mining town turned art colony",
                                         "a quiet suburb beside a ring road", "a river port with a weekly fair"};
const std::vector<std::string> kJobs = {"a night-shift nurse", "a surveyor for the county", "a secondary-school chemistry teacher",
                                        "a ferry mechanic", "a translator of cookbooks", "a bus dispatcher",
                                        "an apprentice stonemason", "a hospital pharmacist"};
const std::vector<std::string> kMoods = {"likes routines that fit around odd working hours",
                                         "is always starting a new project before the last one is finished",
                                         "prefers weekends outdoors whatever the weather",
                                         "keeps a long list of things to try before next summer"};

}  // namespace

ContextProfile make_context(std::uint64_t seed) {
  Rng rng(seed);
  ContextProfile p;
  p.name = rng.pick(kNames);
  const std::string& town = rng.pick(kTowns);
  const std::string& job = rng.pick(kJobs);
  const std::string& mood = rng.pick(kMoods);
  p.background = p.name + " lives in " + town + " and works as " + job + ". Away from work, " + p.name + " " + mood + ".";
  return p;
}

const std::vector<PredicateFrame>& predicate_lexicon() {
  static const std::vector<PredicateFrame> lex = {
      {"keeps_bees", "{name} keeps bees behind the cottage", "{name} does not keep bees behind the cottage"},
      {"bakes_rye", "{name} bakes rye bread on Sundays", "{name} does not bake rye bread on Sundays"},
      {"rides_ferry", "{name} rides the early ferry to work", "{name} does not ride the early ferry to work"},
      {"learns_cello", "{name} is learning to play the cello", "{name} is not learning to play the cello"},
      {"repairs_clocks", "{name} repairs antique clocks", "{name} does not repair antique clocks"},
      {"owns_kayak", "{name} owns a red kayak", "{name} does not own a red kayak"},
      {"visits_night_market", "{name} visits the night market", "{name} does not visit the night market"},
      {"grows_tomatoes", "{name} grows tomatoes on the balcony", "{name} does not grow tomatoes on the balcony"},
      {"writes_to_pen_pal", "{name} writes letters to an old pen pal", "{name} does not write letters to an old pen pal"},
      {"goes_bouldering", "{name} climbs at the indoor bouldering gym", "{name} does not climb at the indoor bouldering gym"},
      {"speaks_portuguese", "{name} speaks Portuguese at home", "{name} does not speak Portuguese at home"},
      {"collects_stamps", "{name} collects stamps from island nations", "{name} does not collect stamps from island nations"},
      {"trains_marathon", "{name} trains for the autumn marathon", "{name} does not train for the autumn marathon"},
      {"sketches_birds", "{name} sketches birds in a pocket notebook", "{name} does not sketch birds in a pocket notebook"},
      {"drives_camper", "{name} drives a converted camper van", "{name} does not drive a converted camper van"},
      {"brews_jasmine_tea", "{name} brews jasmine tea every afternoon", "{name} does not brew jasmine tea every afternoon"},
      {"fixes_bicycles", "{name} fixes bicycles for the neighbours", "{name} does not fix bicycles for the neighbours"},
      {"reads_sea_charts", "{name} reads old sea charts for fun", "{name} does not read old sea charts for fun"},
      {"plays_postal_chess", "{name} plays correspondence chess", "{name} does not play correspondence chess"},
      {"adopted_cat", "{name} adopted a grey cat from the shelter", "{name} did not adopt a grey cat from the shelter"},
      {"library_volunteer", "{name} volunteers at the branch library", "{name} does not volunteer at the branch library"},
      {"sews_quilts", "{name} sews patchwork quilts", "{name} does not sew patchwork quilts"},
      {"sails_dinghy", "{name} sails a dinghy on the reservoir", "{name} does not sail a dinghy on the reservoir"},
      {"hosts_street_dinners", "{name} hosts dinners for the whole street", "{name} does not host dinners for the whole street"},
      {"photographs_sky", "{name} photographs the night sky", "{name} does not photograph the night sky"},
      {"carves_spoons", "{name} carves spoons from birch wood", "{name} does not carve spoons from birch wood"},
      {"sings_in_choir", "{name} sings tenor in the harbour choir", "{name} does not sing tenor in the harbour choir"},
      {"rents_allotment", "{name} rents an allotment by the canal", "{name} does not rent an allotment by the canal"},
      {"forages_mushrooms", "{name} forages for mushrooms in the autumn", "{name} does not forage for mushrooms in the autumn"},
      {"mends_nets", "{name} mends fishing nets at the quay", "{name} does not mend fishing nets at the quay"},
      {"teaches_swimming", "{name} teaches swimming to children", "{name} does not teach swimming to children"},
      {"keeps_dream_journal", "{name} keeps a dream journal", "{name} does not keep a dream journal"},
      {"restores_radios", "{name} restores valve radios", "{name} does not restore valve radios"},
      {"cooks_friday_curry", "{name} cooks a curry from scratch each Friday", "{name} does not cook a curry from scratch each Friday"},
      {"walks_shelter_dogs", "{name} walks dogs for the animal shelter", "{name} does not walk dogs for the animal shelter"},
      {"paints_murals", "{name} paints murals on shop shutters", "{name} does not paint murals on shop shutters"},
      {"takes_night_bus", "{name} takes the night bus home", "{name} does not take the night bus home"},
      {"plays_drums", "{name} plays drums in a garage band", "{name} does not play drums in a garage band"},
      {"bottles_cider", "{name} bottles cider from the orchard", "{name} does not bottle cider from the orchard"},
      {"builds_kites", "{name} builds kites from bamboo and paper", "{name} does not build kites from bamboo and paper"},
      {"learns_sign_language", "{name} is learning sign language", "{name} is not learning sign language"},
      {"rows_at_dawn", "{name} rows on the river at dawn", "{name} does not row on the river at dawn"},
  };
  return lex;
}

const std::vector<std::string>& rule_frames(RuleTemplate t) {
  static const std::map<RuleTemplate, std::vector<std::string>> frames = {
      {RuleTemplate::Impl,
       {"If {A}, then {B}.", "Whenever {A}, {B}.", "{B} if {A}.", "In every case where {A}, {B}.",
        "Provided that {A}, {B}.", "{A} only if {B}.", "As long as {A}, {B} as well.",
        "Any time {A}, it follows that {B}."}},
      {RuleTemplate::AndAnte,
       {"If {A} and {B}, then {C}.", "Whenever both {A} and {B}, {C}.", "{C} if {A} and also {B}.",
        "When {A} while {B}, {C}.", "Provided that {A} and {B}, {C}.",
        "In any case where {A} and {B} together, {C}.", "Once {A} and {B}, {C}."}},
      {RuleTemplate::AndCons,
       {"If {A}, then {B} and {C}.", "Whenever {A}, both {B} and {C}.", "{A} only if {B} and {C}.",
        "Provided that {A}, {B}, and {C} too.", "In every case where {A}, {B} and also {C}.",
        "As long as {A}, {B} and {C}."}},
      {RuleTemplate::OrAnte,
       {"If {A} or {B}, then {C}.", "Whenever either {A} or {B}, {C}.", "{C} if {A} or if {B}.",
        "In any case where {A} or {B}, {C}.", "As soon as {A} or {B}, {C}.", "Provided that {A} or {B}, {C}."}},
      {RuleTemplate::OrCons,
       {"If {A}, then {B} or {C}.", "Whenever {A}, either {B} or {C}.", "{A} only if {B} or {C}.",
        "Provided that {A}, at least one of these holds: {B}; {C}.", "In every case where {A}, {B} or else {C}."}},
      {RuleTemplate::XorAnte,
       {"If exactly one of these holds, {A} or {B}, then {C}.", "Whenever {A} or {B} but not both, {C}.",
        "{C} provided that exactly one holds: {A}; {B}.", "If either {A} or {B}, though not both, then {C}.",
        "In any case where precisely one of the two is true, {A} or {B}, {C}."}},
      {RuleTemplate::XorBare,
       {"Exactly one of these holds: {A}; {B}.", "Either {A} or {B}, but not both.",
        "{A}, or else {B}, and never both.", "One and only one of the following is true: {A}; {B}."}},
  };
  return frames.at(t);
}

// --- translator plumbing -----------------------------------------------------------

std::string bundle_digest(const PromptBundle& b) {
  std::uint64_t h = fnv1a64(b.purpose);
  for (const auto& m : b.messages) {
    h = fnv1a64("\x1f", h);
    h = fnv1a64(m.role, h);
    h = fnv1a64("\x1e", h);
    h = fnv1a64(m.content, h);
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

ReplayTranslator::ReplayTranslator(std::istream& transcript) {
  std::string line;
  int n = 0;
  while (std::getline(transcript, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const ojson j = ojson::parse(line);
      entries_.push_back({j.at("purpose").get<std::string>(), j.value("request_digest", std::string()),
                          j.at("response").get<std::string>()});
    } catch (const ojson::exception& e) {
      throw TranslationError("transcript line " + std::to_string(n) + ": " + e.what());
    }
  }
}

std::unique_ptr<ReplayTranslator> ReplayTranslator::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TranslationError("cannot open transcript " + path);
  return std::make_unique<ReplayTranslator>(in);
}

std::string ReplayTranslator::send(const PromptBundle& prompt) {
  if (next_ >= entries_.size()) throw TranslationError("transcript exhausted at request for " + prompt.purpose);
  const Entry& e = entries_[next_];
  if (e.purpose != prompt.purpose)
    throw TranslationError("transcript expects a " + e.purpose + " request, got " + prompt.purpose);
  if (!e.digest.empty() && e.digest != bundle_digest(prompt))
    throw TranslationError("request digest differs from transcript entry " + std::to_string(next_ + 1));
  ++next_;
  return e.response;
}

std::string RecordingTranslator::send(const PromptBundle& prompt) {
  std::string response = inner_.send(prompt);
  ojson j;
  j["purpose"] = prompt.purpose;
  j["request_digest"] = bundle_digest(prompt);
  ojson msgs = ojson::array();
  for (const auto& m : prompt.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  j["messages"] = std::move(msgs);
  j["response"] = response;
  lines_.push_back(j.dump());
  return response;
}

void RecordingTranslator::write(std::ostream& out) const {
  for (const auto& l : lines_) out << l << '\n';
}

HttpTranslatorConfig HttpTranslatorConfig::from_env() {
  auto get = [](const char* k) {
    const char* v = std::getenv(k);
    return v ? std::string(v) : std::string();
  };
  HttpTranslatorConfig c;
  c.endpoint = get("TRANSLATOR_ENDPOINT");
  c.api_key = get("TRANSLATOR_API_KEY");
  c.model = get("TRANSLATOR_MODEL");
  if (c.endpoint.empty()) throw TranslationError("TRANSLATOR_ENDPOINT is not set");
  return c;
}

HttpTranslator::HttpTranslator(HttpTranslatorConfig cfg) : cfg_(std::move(cfg)) {}

std::string HttpTranslator::send(const PromptBundle& prompt) {
  // split scheme://host[:port] from the path
  const auto scheme_end = cfg_.endpoint.find("://");
  if (scheme_end == std::string::npos) throw TranslationError("endpoint needs a scheme: " + cfg_.endpoint);
  const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
  const std::string base = cfg_.endpoint.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (cfg_.endpoint.starts_with("https://")) throw TranslationError("built without TLS support; use an http endpoint");
#endif

  ojson body;
  body["model"] = cfg_.model;
  ojson msgs = ojson::array();
  for (const auto& m : prompt.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = std::move(msgs);
  body["temperature"] = 0;

  httplib::Client cli(base);
  cli.set_connection_timeout(cfg_.timeout_seconds, 0);
  cli.set_read_timeout(cfg_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

  std::string last;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      last = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last = "server status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw TranslationError("translator status " + std::to_string(res->status) + ": " + res->body);
    try {
      const ojson j = ojson::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const ojson::exception& e) {
      throw TranslationError(std::string("unexpected translator reply: ") + e.what());
    }
  }
  throw TranslationError("translator unreachable after retries (" + last + ")");
}

// --- prompts -------------------------------------------------------------------------

namespace {

PromptBundle bundle(std::string purpose, std::string system, std::string user) {
  return {std::move(purpose), {{"system", std::move(system)}, {"user", std::move(user)}}};
}

std::string mapping_lines(const PredicateMap& map) {
  std::string out;
  for (const auto& [f, e] : map)
    out += to_string(f) + " (" + e.predicate + ")\n  when True: " + e.positive + "\n  when False: " + e.negative + "\n";
  return out;
}

}  // namespace

PromptBundle background_prompt(const std::string& name) {
  return bundle("background", "You write short character sketches that later serve as the setting for logic exercises.",
                "Name: " + name +
                    "\n\nWrite two or three sentences about where this person lives and how they spend an ordinary "
                    "week. Reply with the paragraph only.");
}

PromptBundle predicate_map_prompt(const ContextProfile& ctx, const std::vector<FactId>& facts) {
  std::string symbols;
  for (FactId f : facts) symbols += to_string(f) + "\n";
  return bundle("predicate_map",
                "You give everyday meanings to abstract fact symbols. Every symbol must get its own activity or "
                "property of the character, and no two symbols may share one.",
                "Character: " + ctx.name + "\nBackground:\n" + ctx.background + "\n\nSymbols:\n" + symbols +
                    "\nReply with a single JSON object keyed by symbol. Each value is an object with the members "
                    "\"predicate\" (short snake_case label), \"true\" (a sentence saying it holds) and \"false\" (a "
                    "sentence saying it does not hold). Start every sentence with the character's name and keep "
                    "the symbols out of the sentences.");
}

PromptBundle rule_prompt(const ContextProfile& ctx, const PredicateMap& map, const Rule& rule) {
  return bundle("rule",
                "You restate formal rules as one plain English sentence about a character, keeping the logical "
                "connectives exact.",
                "Background:\n" + ctx.background + "\n\nSymbol meanings:\n" + mapping_lines(map) + "\nRule:\n" +
                    render_rule(rule) +
                    "\n\nWrite one sentence. Vary the sentence shape from rule to rule, and keep xor readings "
                    "exclusive. Reply with the sentence only.");
}

PromptBundle step_prompt(const ContextProfile& ctx, const PredicateMap& map, const Step& step) {
  std::string sup;
  for (const auto& l : step.supports) sup += to_string(l) + "\n";
  return bundle("step",
                "You turn a single symbolic derivation into one sentence of ordinary prose. Report the derivation "
                "as written without judging it.",
                "Background:\n" + ctx.background + "\n\nSymbol meanings:\n" + mapping_lines(map) + "\nUsing:\n" +
                    sup + "Rule: " + render_rule(step.rule) + "\nDerived: " + to_string(step.conclusion) +
                    "\n\nWrite one sentence that states the facts used and what they lead to. Do not comment on "
                    "soundness and do not mention symbols. Reply with the sentence only.");
}

PromptBundle judge_prompt(const std::string& goal, const std::vector<std::string>& base_facts,
                          const std::vector<std::string>& previous_steps, const std::string& current_step) {
  std::string facts, prev;
  for (const auto& f : base_facts) facts += "- " + f + "\n";
  for (std::size_t i = 0; i < previous_steps.size(); ++i)
    prev += std::to_string(i + 1) + ". " + previous_steps[i] + "\n";
  if (prev.empty()) prev = "(none)\n";
  return bundle("judge", "You check a derivation one step at a time.",
                "Goal:\n" + goal + "\n\nKnown facts:\n" + facts + "\nEarlier steps:\n" + prev + "\nStep to check:\n" +
                    current_step +
                    "\n\nDoes the step to check follow from the known facts and the earlier steps? Answer with "
                    "one word: true or false.");
}

// --- predicate maps --------------------------------------------------------------

std::vector<FactId> instance_facts(const Instance& inst) {
  std::set<FactId> fs;
  auto add_step = [&](const Step& s) {
    for (const auto& l : s.supports) fs.insert(l.fact);
    fs.insert(s.conclusion.fact);
    for (FactId f : s.rule.facts()) fs.insert(f);
  };
  fs.insert(inst.correct.goal.fact);
  for (const auto& l : inst.correct.base_facts) fs.insert(l.fact);
  for (const auto& r : inst.correct.rules)
    for (FactId f : r.facts()) fs.insert(f);
  for (const auto& s : inst.correct.steps) add_step(s);
  for (const auto& s : inst.erroneous.steps) add_step(s);
  return {fs.begin(), fs.end()};
}

void validate_predicate_map(const PredicateMap& map, const std::vector<FactId>& facts) {
  for (FactId f : facts)
    if (!map.count(f)) throw TranslationError("predicate map misses " + to_string(f));
  std::set<std::string> names, sentences;
  for (const auto& [f, e] : map) {
    if (e.predicate.empty() || e.positive.empty() || e.negative.empty())
      throw TranslationError("predicate map entry for " + to_string(f) + " has an empty field");
    if (!names.insert(e.predicate).second) throw TranslationError("duplicate predicate '" + e.predicate + "'");
    if (!sentences.insert(e.positive).second || !sentences.insert(e.negative).second)
      throw TranslationError("duplicate sentence in predicate map entry for " + to_string(f));
  }
}

PredicateMap build_predicate_map(const Instance& inst, std::uint64_t seed) {
  const auto facts = instance_facts(inst);
  const auto& lex = predicate_lexicon();
  if (facts.size() > lex.size())
    throw std::length_error("instance mentions " + std::to_string(facts.size()) + " facts; lexicon holds " +
                            std::to_string(lex.size()));
  std::vector<std::size_t> order(lex.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const std::string name = inst.context.name.empty() ? "Robin" : inst.context.name;
  PredicateMap map;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    const PredicateFrame& fr = lex[order[i]];
    map[facts[i]] = {fr.predicate, replace_all(fr.positive, "{name}", name), replace_all(fr.negative, "{name}", name)};
  }
  return map;
}

PredicateMap build_predicate_map(const Instance& inst, TranslatorClient& client, int retries) {
  const auto facts = instance_facts(inst);
  const PromptBundle prompt = predicate_map_prompt(inst.context, facts);
  std::string last;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    const std::string reply = client.send(prompt);
    try {
      const auto open = reply.find('{');
      const auto close = reply.rfind('}');
      if (open == std::string::npos || close == std::string::npos || close < open)
        throw TranslationError("reply holds no JSON object");
      const ojson j = ojson::parse(reply.substr(open, close - open + 1));
      PredicateMap map;
      for (const auto& [sym, e] : j.items()) {
        const Literal l = parse_literal(sym + "=True");
        map[l.fact] = {e.at("predicate").get<std::string>(), e.at("true").get<std::string>(),
                       e.at("false").get<std::string>()};
      }
      validate_predicate_map(map, facts);
      for (const auto& [f, e] : map) {
        auto v = lint_text(e.positive, 0);
        auto w = lint_text(e.negative, 0);
        if (!v.empty() || !w.empty()) throw TranslationError("sentence for " + to_string(f) + " uses a forbidden term");
      }
      return map;
    } catch (const TranslationError& e) {
      last = e.what();
    } catch (const std::exception& e) {
      last = std::string("unreadable mapping: ") + e.what();
    }
  }
  throw TranslationError("predicate mapping rejected after " + std::to_string(retries + 1) + " tries: " + last);
}

const std::string& sentence(const PredicateMap& map, const Literal& lit) {
  const PredicateEntry& e = map.at(lit.fact);
  return lit.value ? e.positive : e.negative;
}

// --- realization ---------------------------------------------------------------------

namespace {

const std::vector<std::string> kStepFrames = {
    "Since {S}, rule {R} gives that {C}.",
    "We have that {S}; by rule {R}, {C}.",
    "Given that {S}, rule {R} lets us infer that {C}.",
    "Because {S}, it follows from rule {R} that {C}.",
    "Knowing that {S}, rule {R} tells us that {C}.",
};

std::string join_clauses(const std::vector<std::string>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += (i + 1 == xs.size()) ? " and " : ", ";
    out += xs[i];
  }
  return out;
}

std::string realize_rule(const Rule& r, const PredicateMap& map, std::uint64_t seed) {
  const auto& frames = rule_frames(r.templ());
  const std::string& frame = frames[(fnv1a64(render_rule(r)) ^ mix64(seed)) % frames.size()];
  std::string out = replace_all(frame, "{A}", map.at(r.slot(Slot::A)).positive);
  out = replace_all(out, "{B}", map.at(r.slot(Slot::B)).positive);
  if (r.arity() == 3) out = replace_all(out, "{C}", map.at(r.slot(Slot::C)).positive);
  return out;
}

std::string rule_number(const Instance& inst, const Rule& r) {
  const auto& rules = inst.correct.rules;
  auto it = std::find(rules.begin(), rules.end(), r);
  return it == rules.end() ? render_rule(r) : std::to_string(it - rules.begin() + 1);
}

std::string realize_step(const Instance& inst, const Step& s, const PredicateMap& map, std::uint64_t seed) {
  // frame keyed by rule and support count only, so a changed conclusion changes only its sentence
  const std::uint64_t key = fnv1a64(render_rule(s.rule) + "#" + std::to_string(s.supports.size())) ^ mix64(seed + 1);
  const std::string& frame = kStepFrames[key % kStepFrames.size()];
  std::vector<std::string> sup;
  for (const auto& l : s.supports) sup.push_back(sentence(map, l));
  std::string out = replace_all(frame, "{S}", join_clauses(sup));
  out = replace_all(out, "{R}", rule_number(inst, s.rule));
  return replace_all(out, "{C}", sentence(map, s.conclusion));
}

}  // namespace

NlRecord realize_instance(const Instance& inst, const PredicateMap& map, NlMode mode, std::uint64_t seed) {
  NlRecord nl;
  nl.mode = std::string(to_string(mode));
  nl.predicates = map;
  nl.goal = "Show that " + sentence(map, inst.correct.goal) + ".";
  for (const auto& l : inst.correct.base_facts) nl.base_facts.push_back(sentence(map, l) + ".");
  for (const auto& r : inst.correct.rules) nl.rules.push_back(realize_rule(r, map, seed));
  for (const auto& s : inst.correct.steps) {
    std::string t = realize_step(inst, s, map, seed);
    if (mode == NlMode::Annotated) t += " [" + render_step(s) + "]";
    nl.correct_steps.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < inst.erroneous.steps.size(); ++i) {
    const Step& s = inst.erroneous.steps[i];
    std::string t = realize_step(inst, s, map, seed);
    if (mode == NlMode::Annotated) {
      t += " [" + render_step(s) + "]";
      if (static_cast<int>(i) + 1 == inst.erroneous.k)
        t += " [first deviation: " + std::string(to_string(inst.erroneous.error_type)) + "]";
    }
    nl.erroneous_steps.push_back(std::move(t));
  }
  return nl;
}

// --- lint ------------------------------------------------------------------------------

const std::vector<std::string>& forbidden_terms() {
  static const std::vector<std::string> terms = {
      "error",    "mistake", "wrong",   "invalid",       "unsupported",          "evidence",
      "established", "assumes", "depends", "relies",     "repeats",              "restates",
      "the rule says", "according to the rule", "this step", "the conclusion"};
  return terms;
}

std::vector<LintViolation> lint_text(std::string_view text, int step) {
  static const std::regex re = [] {
    std::string alt;
    for (const auto& t : forbidden_terms()) alt += (alt.empty() ? "" : "|") + replace_all(t, " ", "\\s+");
    return std::regex("\\b(" + alt + ")\\b", std::regex::ECMAScript | std::regex::icase);
  }();
  std::vector<LintViolation> out;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
    std::string term = it->str(1);
    std::transform(term.begin(), term.end(), term.begin(), [](unsigned char c) { return std::tolower(c); });
    out.push_back({step, std::move(term), static_cast<std::size_t>(it->position(1))});
  }
  return out;
}

std::vector<LintViolation> leak_lint(const NlRecord& nl, int k) {
  std::vector<LintViolation> out;
  for (std::size_t i = 0; i < nl.erroneous_steps.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    if (t < k) continue;
    auto v = lint_text(nl.erroneous_steps[i], t);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace cfps
