#pragma once

// BioNLP-style standoff corpora: .txt/.a1/.a2 triples plus a JSONL
// equivalent. Offsets are byte offsets into the document text; every parsed
// mention is cross-checked against the text it points into.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bioee/common.hpp"

namespace bioee::standoff {

struct Token {
  std::string text;
  int64_t char_start = 0;
  int64_t char_end = 0;
  int sentence_index = 0;
};

enum class MentionKind { Protein, Trigger };

struct Mention {
  std::string id;
  MentionKind kind = MentionKind::Protein;
  std::string label;
  int64_t char_start = 0;
  int64_t char_end = 0;
  std::string text;
};

enum class Role { Theme, Cause };

inline const char* role_name(Role r) { return r == Role::Theme ? "Theme" : "Cause"; }

struct EventArg {
  Role role = Role::Theme;
  std::string target;  // mention id or event id
};

struct EventRecord {
  std::string id;
  std::string trigger_id;
  std::vector<EventArg> args;
};

struct Document {
  std::string doc_id;
  std::string text;
  std::vector<std::vector<Token>> sentences;
  std::vector<Mention> mentions;
  std::vector<EventRecord> events;

  const Mention* find_mention(std::string_view id) const {
    for (const Mention& m : mentions)
      if (m.id == id) return &m;
    return nullptr;
  }
  const EventRecord* find_event(std::string_view id) const {
    for (const EventRecord& e : events)
      if (e.id == id) return &e;
    return nullptr;
  }
};

struct Corpus {
  std::vector<Document> documents;

  const Document* find(std::string_view doc_id) const {
    for (const Document& d : documents)
      if (d.doc_id == doc_id) return &d;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Tokenization
//
// Whitespace split with punctuation detachment; sentence boundaries at
// '.', '!', '?' followed by whitespace and an uppercase letter, or end of
// text. Tokens cover every non-whitespace byte.

inline bool is_detached_punct(char c) {
  return c == '.' || c == ',' || c == ';' || c == ':' || c == '(' || c == ')' || c == '-';
}

inline std::vector<std::vector<Token>> tokenize(std::string_view text) {
  std::vector<std::vector<Token>> sentences;
  if (text.empty()) return sentences;

  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  auto is_upper = [](char c) { return c >= 'A' && c <= 'Z'; };

  // sentence end positions (exclusive)
  std::vector<size_t> bounds;
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    size_t j = i + 1;
    if (j == text.size()) {
      bounds.push_back(j);
      continue;
    }
    if (!is_space(text[j])) continue;
    while (j < text.size() && is_space(text[j])) ++j;
    if (j == text.size() || is_upper(text[j])) bounds.push_back(i + 1);
  }
  if (bounds.empty() || bounds.back() != text.size()) bounds.push_back(text.size());

  size_t start = 0;
  for (size_t bound : bounds) {
    std::vector<Token> sentence;
    size_t i = start;
    while (i < bound) {
      if (is_space(text[i])) {
        ++i;
        continue;
      }
      size_t tok_start = i;
      if (is_detached_punct(text[i])) {
        ++i;
      } else {
        while (i < bound && !is_space(text[i]) && !is_detached_punct(text[i])) ++i;
      }
      Token t;
      t.text = std::string(text.substr(tok_start, i - tok_start));
      t.char_start = int64_t(tok_start);
      t.char_end = int64_t(i);
      t.sentence_index = int(sentences.size());
      sentence.push_back(std::move(t));
    }
    if (!sentence.empty()) sentences.push_back(std::move(sentence));
    start = bound;
  }
  return sentences;
}

// ---------------------------------------------------------------------------
// .a1 / .a2 parsing

namespace detail {

inline std::vector<std::string> nonempty_lines(std::string_view content, std::vector<int>* line_numbers = nullptr) {
  std::vector<std::string> lines;
  int line_no = 0;
  for (const std::string& raw : split(content, '\n')) {
    ++line_no;
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(line);
    if (line_numbers) line_numbers->push_back(line_no);
  }
  return lines;
}

inline Mention parse_mention_line(const std::string& line, int line_no, MentionKind default_kind) {
  auto fields = split(line, '\t');
  if (fields.size() != 3) fail("MalformedLine", "line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
  auto mid = split(fields[1], ' ');
  if (mid.size() != 3) fail("MalformedLine", "line " + std::to_string(line_no) + ": expected TYPE START END");
  Mention m;
  m.id = fields[0];
  m.kind = default_kind;
  m.label = mid[0];
  try {
    m.char_start = std::stoll(mid[1]);
    m.char_end = std::stoll(mid[2]);
  } catch (const std::exception&) {
    fail("MalformedLine", "line " + std::to_string(line_no) + ": non-numeric offsets");
  }
  if (m.char_start < 0 || m.char_end <= m.char_start)
    fail("MalformedLine", "line " + std::to_string(line_no) + ": empty or negative span");
  m.text = fields[2];
  return m;
}

// Theme2..ThemeN normalize to Theme; multi-theme grouping is regenerated by
// unmerging on output.
inline std::optional<Role> parse_role(std::string_view name) {
  auto strip_index = [](std::string_view s) {
    size_t end = s.size();
    while (end > 0 && s[end - 1] >= '0' && s[end - 1] <= '9') --end;
    return s.substr(0, end);
  };
  std::string_view base = strip_index(name);
  if (base == "Theme") return Role::Theme;
  if (base == "Cause") return Role::Cause;
  return std::nullopt;
}

}  // namespace detail

inline std::vector<Mention> parse_a1(std::string_view content) {
  std::vector<int> line_numbers;
  auto lines = detail::nonempty_lines(content, &line_numbers);
  std::vector<Mention> mentions;
  std::set<std::string> seen;
  for (size_t i = 0; i < lines.size(); ++i) {
    Mention m = detail::parse_mention_line(lines[i], line_numbers[i], MentionKind::Protein);
    if (!seen.insert(m.id).second) fail("MalformedLine", "line " + std::to_string(line_numbers[i]) + ": duplicate id " + m.id);
    mentions.push_back(std::move(m));
  }
  return mentions;
}

struct A2File {
  std::vector<Mention> triggers;
  std::vector<EventRecord> events;
};

inline A2File parse_a2(std::string_view content) {
  std::vector<int> line_numbers;
  auto lines = detail::nonempty_lines(content, &line_numbers);
  A2File out;
  std::set<std::string> trigger_ids, event_ids;
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const int line_no = line_numbers[i];
    if (line[0] == 'T') {
      Mention m = detail::parse_mention_line(line, line_no, MentionKind::Trigger);
      if (!trigger_ids.insert(m.id).second) fail("MalformedLine", "line " + std::to_string(line_no) + ": duplicate id " + m.id);
      out.triggers.push_back(std::move(m));
    } else if (line[0] == 'E') {
      auto fields = split(line, '\t');
      if (fields.size() != 2) fail("MalformedLine", "line " + std::to_string(line_no) + ": expected 2 tab-separated fields");
      auto parts = split(fields[1], ' ');
      if (parts.empty()) fail("MalformedLine", "line " + std::to_string(line_no) + ": empty event body");
      auto type_trig = split(parts[0], ':');
      if (type_trig.size() != 2) fail("MalformedLine", "line " + std::to_string(line_no) + ": expected TYPE:TRIGGER");
      EventRecord e;
      e.id = fields[0];
      e.trigger_id = type_trig[1];
      for (size_t k = 1; k < parts.size(); ++k) {
        if (parts[k].empty()) continue;
        auto role_target = split(parts[k], ':');
        if (role_target.size() != 2) fail("MalformedLine", "line " + std::to_string(line_no) + ": expected ROLE:TARGET");
        auto role = detail::parse_role(role_target[0]);
        if (!role) fail("MalformedLine", "line " + std::to_string(line_no) + ": unsupported role " + role_target[0]);
        e.args.push_back({*role, role_target[1]});
      }
      if (!event_ids.insert(e.id).second) fail("MalformedLine", "line " + std::to_string(line_no) + ": duplicate id " + e.id);
      out.events.push_back(std::move(e));
    } else {
      fail("MalformedLine", "line " + std::to_string(line_no) + ": unknown annotation kind '" + line.substr(0, 1) + "'");
    }
  }

  // resolve within-file references; T targets may live in the .a1 layer and
  // are checked at corpus assembly
  for (const EventRecord& e : out.events) {
    if (!trigger_ids.count(e.trigger_id)) fail("DanglingReference", e.id + " trigger " + e.trigger_id);
    for (const EventArg& a : e.args) {
      if (a.target.empty()) fail("DanglingReference", e.id + " has an empty target");
      if (a.target[0] == 'E' && !event_ids.count(a.target)) fail("DanglingReference", e.id + " argument " + a.target);
    }
  }

  // the event reference graph must be a DAG
  std::map<std::string, int> state;  // 0 unseen, 1 open, 2 done
  std::map<std::string, const EventRecord*> by_id;
  for (const EventRecord& e : out.events) by_id[e.id] = &e;
  std::function<void(const EventRecord&)> visit = [&](const EventRecord& e) {
    state[e.id] = 1;
    for (const EventArg& a : e.args) {
      if (a.target.empty() || a.target[0] != 'E') continue;
      int s = state[a.target];
      if (s == 1) fail("CyclicEvent", a.target);
      if (s == 0) visit(*by_id.at(a.target));
    }
    state[e.id] = 2;
  };
  for (const EventRecord& e : out.events)
    if (state[e.id] == 0) visit(e);

  return out;
}

// Canonical serialization: triggers by (char_start, id); events in
// topological order with ties broken by id; Theme arguments first (numbered
// Theme, Theme2, ... within an event), then Cause.
inline std::string serialize_a2(const std::vector<Mention>& triggers, const std::vector<EventRecord>& events) {
  std::vector<const Mention*> ts;
  for (const Mention& m : triggers) ts.push_back(&m);
  std::sort(ts.begin(), ts.end(), [](const Mention* a, const Mention* b) {
    if (a->char_start != b->char_start) return a->char_start < b->char_start;
    return natural_id_less(a->id, b->id);
  });

  std::map<std::string, const EventRecord*> by_id;
  std::map<std::string, int> pending;  // unresolved event-valued targets
  std::map<std::string, std::vector<std::string>> dependents;
  for (const EventRecord& e : events) by_id[e.id] = &e;
  for (const EventRecord& e : events) {
    int deps = 0;
    for (const EventArg& a : e.args)
      if (by_id.count(a.target)) {
        ++deps;
        dependents[a.target].push_back(e.id);
      }
    pending[e.id] = deps;
  }
  auto cmp = [](const std::string& a, const std::string& b) { return natural_id_less(a, b); };
  std::set<std::string, decltype(cmp)> ready(cmp);
  for (const auto& [id, deps] : pending)
    if (deps == 0) ready.insert(id);
  std::vector<const EventRecord*> ordered;
  while (!ready.empty()) {
    std::string id = *ready.begin();
    ready.erase(ready.begin());
    ordered.push_back(by_id.at(id));
    for (const std::string& dep : dependents[id])
      if (--pending[dep] == 0) ready.insert(dep);
  }
  if (ordered.size() != events.size()) fail("CyclicEvent", "event graph is not a DAG");

  std::string out;
  for (const Mention* m : ts) {
    out += m->id + "\t" + m->label + " " + std::to_string(m->char_start) + " " + std::to_string(m->char_end) + "\t" +
           m->text + "\n";
  }
  for (const EventRecord* e : ordered) {
    out += e->id + "\t";
    const Mention* trig = nullptr;
    for (const Mention* m : ts)
      if (m->id == e->trigger_id) trig = m;
    if (!trig) fail("DanglingReference", e->id + " trigger " + e->trigger_id);
    out += trig->label + ":" + e->trigger_id;
    int theme_no = 0;
    for (const EventArg& a : e->args) {
      if (a.role != Role::Theme) continue;
      ++theme_no;
      out += " Theme";
      if (theme_no > 1) out += std::to_string(theme_no);
      out += ":" + a.target;
    }
    for (const EventArg& a : e->args) {
      if (a.role != Role::Cause) continue;
      out += " Cause:" + a.target;
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus assembly

namespace detail {

inline void validate_document(const Document& doc, std::vector<std::string>* failures, std::string* first_code) {
  auto report = [&](const std::string& code, const std::string& msg) {
    if (first_code->empty()) *first_code = code;
    failures->push_back(doc.doc_id + ": " + code + ": " + msg);
  };
  std::set<std::string> mention_ids, event_ids;
  for (const Mention& m : doc.mentions) {
    if (!mention_ids.insert(m.id).second) report("MalformedLine", "duplicate mention id " + m.id);
    if (m.char_start < 0 || m.char_end > int64_t(doc.text.size()) || m.char_start >= m.char_end) {
      report("OffsetMismatch", m.id + " span outside document");
      continue;
    }
    std::string_view slice = std::string_view(doc.text).substr(size_t(m.char_start), size_t(m.char_end - m.char_start));
    if (slice != m.text) report("OffsetMismatch", m.id + " text '" + m.text + "' vs document '" + std::string(slice) + "'");
  }
  for (const EventRecord& e : doc.events) event_ids.insert(e.id);
  for (const EventRecord& e : doc.events) {
    const Mention* trig = doc.find_mention(e.trigger_id);
    if (!trig)
      report("DanglingReference", e.id + " trigger " + e.trigger_id);
    else if (trig->kind != MentionKind::Trigger)
      report("DanglingReference", e.id + " trigger " + e.trigger_id + " is not a trigger mention");
    for (const EventArg& a : e.args)
      if (!mention_ids.count(a.target) && !event_ids.count(a.target))
        report("DanglingReference", e.id + " argument " + a.target);
  }
}

}  // namespace detail

inline Corpus load_corpus(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail("MissingFile", dir.string() + " is not a directory");

  std::set<std::string> stems_txt, stems_other;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".txt") stems_txt.insert(entry.path().stem().string());
    if (ext == ".a1" || ext == ".a2") stems_other.insert(entry.path().stem().string());
  }
  for (const std::string& stem : stems_other)
    if (!stems_txt.count(stem)) fail("MissingFile", (dir / (stem + ".txt")).string());

  Corpus corpus;
  std::vector<std::string> failures;
  std::string first_code;
  for (const std::string& stem : stems_txt) {
    Document doc;
    doc.doc_id = stem;
    doc.text = read_file(dir / (stem + ".txt"));
    doc.sentences = tokenize(doc.text);
    try {
      if (fs::exists(dir / (stem + ".a1"))) {
        for (Mention& m : parse_a1(read_file(dir / (stem + ".a1")))) doc.mentions.push_back(std::move(m));
      }
      if (fs::exists(dir / (stem + ".a2"))) {
        A2File a2 = parse_a2(read_file(dir / (stem + ".a2")));
        for (Mention& m : a2.triggers) doc.mentions.push_back(std::move(m));
        doc.events = std::move(a2.events);
      }
    } catch (const Error& e) {
      if (first_code.empty()) first_code = e.code();
      failures.push_back(stem + ": " + e.what());
      corpus.documents.push_back(std::move(doc));
      continue;
    }
    detail::validate_document(doc, &failures, &first_code);
    corpus.documents.push_back(std::move(doc));
  }
  if (!failures.empty()) {
    std::string report;
    for (const std::string& f : failures) report += f + "\n";
    throw Error(first_code, "corpus validation failed:\n" + report);
  }
  std::sort(corpus.documents.begin(), corpus.documents.end(),
            [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
  return corpus;
}

// ---------------------------------------------------------------------------
// JSONL alternative: one document object per line

inline nlohmann::json document_to_json(const Document& doc) {
  nlohmann::json mentions = nlohmann::json::array();
  for (const Mention& m : doc.mentions)
    mentions.push_back({{"id", m.id},
                        {"kind", m.kind == MentionKind::Protein ? "Protein" : "Trigger"},
                        {"label", m.label},
                        {"start", m.char_start},
                        {"end", m.char_end},
                        {"text", m.text}});
  nlohmann::json events = nlohmann::json::array();
  for (const EventRecord& e : doc.events) {
    nlohmann::json args = nlohmann::json::array();
    for (const EventArg& a : e.args) args.push_back({{"role", role_name(a.role)}, {"target", a.target}});
    events.push_back({{"id", e.id}, {"trigger", e.trigger_id}, {"args", args}});
  }
  return {{"doc_id", doc.doc_id}, {"text", doc.text}, {"mentions", mentions}, {"events", events}};
}

inline Document document_from_json(const nlohmann::json& j) {
  Document doc;
  doc.doc_id = j.at("doc_id");
  doc.text = j.at("text");
  doc.sentences = tokenize(doc.text);
  for (const auto& m : j.value("mentions", nlohmann::json::array())) {
    Mention mention;
    mention.id = m.at("id");
    mention.kind = m.at("kind") == "Trigger" ? MentionKind::Trigger : MentionKind::Protein;
    mention.label = m.at("label");
    mention.char_start = m.at("start");
    mention.char_end = m.at("end");
    mention.text = m.at("text");
    doc.mentions.push_back(std::move(mention));
  }
  for (const auto& e : j.value("events", nlohmann::json::array())) {
    EventRecord event;
    event.id = e.at("id");
    event.trigger_id = e.at("trigger");
    for (const auto& a : e.value("args", nlohmann::json::array())) {
      auto role = detail::parse_role(a.at("role").get<std::string>());
      if (!role) fail("MalformedLine", "unsupported role in " + event.id);
      event.args.push_back({*role, a.at("target")});
    }
    doc.events.push_back(std::move(event));
  }
  return doc;
}

inline Corpus load_corpus_jsonl(const std::filesystem::path& file) {
  Corpus corpus;
  std::vector<std::string> failures;
  std::string first_code;
  for (const std::string& line : split(read_file(file), '\n')) {
    if (line.empty()) continue;
    Document doc = document_from_json(nlohmann::json::parse(line));
    detail::validate_document(doc, &failures, &first_code);
    corpus.documents.push_back(std::move(doc));
  }
  if (!failures.empty()) {
    std::string report;
    for (const std::string& f : failures) report += f + "\n";
    throw Error(first_code, "corpus validation failed:\n" + report);
  }
  return corpus;
}

inline void save_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& file) {
  std::string out;
  for (const Document& doc : corpus.documents) out += document_to_json(doc).dump() + "\n";
  write_file(file, out);
}

}  // namespace bioee::standoff
