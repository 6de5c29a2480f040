#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <functional>
#include <set>

#include "bioee/standoff.hpp"

using namespace bioee;
using namespace bioee::standoff;

namespace {

const std::filesystem::path kMiniCorpus = std::filesystem::path(BIOEE_REPO_ROOT) / "fixtures" / "mini_corpus";

std::string check_error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

// Structural equality: same ids and triggers, same themes in order, same
// causes in order. Theme/Cause interleaving is not significant because the
// canonical form always writes themes first.
bool same_events(const std::vector<EventRecord>& a, const std::vector<EventRecord>& b) {
  if (a.size() != b.size()) return false;
  auto key = [](const EventRecord& e) {
    std::string k = e.id + "|" + e.trigger_id;
    for (const auto& arg : e.args)
      if (arg.role == Role::Theme) k += "|Theme:" + arg.target;
    for (const auto& arg : e.args)
      if (arg.role == Role::Cause) k += "|Cause:" + arg.target;
    return k;
  };
  std::set<std::string> ka, kb;
  for (const auto& e : a) ka.insert(key(e));
  for (const auto& e : b) kb.insert(key(e));
  return ka == kb;
}

bool same_mentions(const std::vector<Mention>& a, const std::vector<Mention>& b) {
  if (a.size() != b.size()) return false;
  auto key = [](const Mention& m) {
    return m.id + "|" + m.label + "|" + std::to_string(m.char_start) + "|" + std::to_string(m.char_end) + "|" + m.text;
  };
  std::set<std::string> ka, kb;
  for (const auto& m : a) ka.insert(key(m));
  for (const auto& m : b) kb.insert(key(m));
  return ka == kb;
}

// Seeded generator of well-formed .a2 content for round-trip fuzzing.
A2File random_a2(Rng& rng) {
  A2File out;
  static const char* kTypes[] = {"Gene_expression", "Transcription",       "Phosphorylation",
                                 "Binding",         "Positive_regulation", "Negative_regulation",
                                 "Regulation",      "Localization",        "Protein_catabolism"};
  const int n_triggers = 1 + int(rng.below(6));
  int64_t cursor = 0;
  for (int i = 0; i < n_triggers; ++i) {
    Mention m;
    m.id = "T" + std::to_string(100 + i);
    m.kind = MentionKind::Trigger;
    m.label = kTypes[rng.below(9)];
    m.char_start = cursor + int64_t(rng.below(4));
    m.char_end = m.char_start + 1 + int64_t(rng.below(9));
    cursor = m.char_end + 1;
    m.text = "w" + std::to_string(i);
    out.triggers.push_back(std::move(m));
  }
  const int n_events = int(rng.below(7));
  for (int i = 0; i < n_events; ++i) {
    EventRecord e;
    e.id = "E" + std::to_string(i + 1);
    e.trigger_id = out.triggers[rng.below(out.triggers.size())].id;
    const int n_args = 1 + int(rng.below(3));
    for (int k = 0; k < n_args; ++k) {
      EventArg a;
      a.role = rng.uniform() < 0.7 ? Role::Theme : Role::Cause;
      // earlier events only, so the result stays acyclic
      if (!out.events.empty() && rng.uniform() < 0.4)
        a.target = out.events[rng.below(out.events.size())].id;
      else
        a.target = "T" + std::to_string(1 + rng.below(4));  // protein layer ids
      e.args.push_back(std::move(a));
    }
    bool has_theme = false;
    for (const auto& a : e.args) has_theme |= a.role == Role::Theme;
    if (!has_theme) e.args[0].role = Role::Theme;
    out.events.push_back(std::move(e));
  }
  return out;
}

}  // namespace

TEST_CASE("tokenize: empty input") { CHECK(tokenize("").empty()); }

TEST_CASE("tokenize: single sentence with detached period") {
  auto sentences = tokenize("A binds B.");
  REQUIRE(sentences.size() == 1);
  const auto& toks = sentences[0];
  REQUIRE(toks.size() == 4);
  CHECK(toks[0].text == "A");
  CHECK(toks[1].text == "binds");
  CHECK(toks[2].text == "B");
  CHECK(toks[3].text == ".");
  CHECK(toks[0].char_start == 0);
  CHECK(toks[0].char_end == 1);
  CHECK(toks[1].char_start == 2);
  CHECK(toks[1].char_end == 7);
  CHECK(toks[2].char_start == 8);
  CHECK(toks[2].char_end == 9);
  CHECK(toks[3].char_start == 9);
  CHECK(toks[3].char_end == 10);
}

TEST_CASE("tokenize: two sentences, offsets re-slice the document") {
  const std::string text = "X. Y.";
  auto sentences = tokenize(text);
  REQUIRE(sentences.size() == 2);
  for (const auto& sentence : sentences)
    for (const auto& tok : sentence)
      CHECK(text.substr(size_t(tok.char_start), size_t(tok.char_end - tok.char_start)) == tok.text);
  CHECK(sentences[0][0].text == "X");
  CHECK(sentences[1][0].text == "Y");
  CHECK(sentences[1][0].sentence_index == 1);
}

TEST_CASE("tokenize: every non-space byte is covered") {
  Rng rng(21);
  const std::string alphabet = "abzABZ.,;:()- \n?!";
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const size_t len = rng.below(60);
    for (size_t i = 0; i < len; ++i) text += alphabet[rng.below(alphabet.size())];
    auto sentences = tokenize(text);
    std::string reassembled(text.size(), ' ');
    for (const auto& sentence : sentences)
      for (const auto& tok : sentence) {
        CHECK(text.substr(size_t(tok.char_start), size_t(tok.char_end - tok.char_start)) == tok.text);
        for (int64_t p = tok.char_start; p < tok.char_end; ++p) reassembled[size_t(p)] = text[size_t(p)];
      }
    std::string expected = text;
    for (char& c : expected)
      if (c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') c = ' ';
    CHECK(reassembled == expected);
  }
}

TEST_CASE("parse_a1 basics") {
  auto mentions = parse_a1("T1\tProtein 0 9\tProtein A");
  REQUIRE(mentions.size() == 1);
  CHECK(mentions[0].id == "T1");
  CHECK(mentions[0].kind == MentionKind::Protein);
  CHECK(mentions[0].char_start == 0);
  CHECK(mentions[0].char_end == 9);
  CHECK(mentions[0].text == "Protein A");

  CHECK(parse_a1("").empty());
  CHECK(check_error_code([] { parse_a1("T1\tProtein 0 9"); }) == "MalformedLine");
}

TEST_CASE("parse_a2 basics") {
  auto a2 = parse_a2("T2\tGene_expression 20 30\texpression\nE1\tGene_expression:T2 Theme:T1");
  REQUIRE(a2.triggers.size() == 1);
  REQUIRE(a2.events.size() == 1);
  CHECK(a2.events[0].trigger_id == "T2");
  REQUIRE(a2.events[0].args.size() == 1);
  CHECK(a2.events[0].args[0].role == Role::Theme);
  CHECK(a2.events[0].args[0].target == "T1");
}

TEST_CASE("parse_a2 rejects self-referential events") {
  CHECK(check_error_code([] {
          parse_a2("T9\tRegulation 0 3\treg\nE1\tRegulation:T9 Theme:E1");
        }) == "CyclicEvent");
}

TEST_CASE("parse_a2 rejects dangling event references") {
  CHECK(check_error_code([] {
          parse_a2("T9\tRegulation 0 3\treg\nE1\tRegulation:T9 Theme:E7");
        }) == "DanglingReference");
}

TEST_CASE("parse_a2 handles the nested pair") {
  const std::string content =
      "T3\tGene_expression 23 33\texpression\n"
      "T4\tNegative_regulation 10 18\tinhibits\n"
      "E1\tGene_expression:T3 Theme:T2\n"
      "E2\tNegative_regulation:T4 Theme:E1 Cause:T1\n";
  auto a2 = parse_a2(content);
  REQUIRE(a2.events.size() == 2);
  const EventRecord* outer = nullptr;
  for (const auto& e : a2.events)
    if (e.id == "E2") outer = &e;
  REQUIRE(outer != nullptr);
  CHECK(outer->args[0].target == "E1");
  CHECK(outer->args[0].role == Role::Theme);
}

TEST_CASE("parse_a2 normalizes indexed Theme roles") {
  auto a2 = parse_a2("T1\tBinding 0 7\tBinding\nE1\tBinding:T1 Theme:T5 Theme2:T6");
  REQUIRE(a2.events[0].args.size() == 2);
  CHECK(a2.events[0].args[0].role == Role::Theme);
  CHECK(a2.events[0].args[1].role == Role::Theme);
  CHECK(a2.events[0].args[1].target == "T6");
}

TEST_CASE("serialize_a2: empty input and single trigger") {
  CHECK(serialize_a2({}, {}) == "");

  Mention trig;
  trig.id = "T3";
  trig.kind = MentionKind::Trigger;
  trig.label = "Binding";
  trig.char_start = 0;
  trig.char_end = 7;
  trig.text = "Binding";
  CHECK(serialize_a2({trig}, {}) == "T3\tBinding 0 7\tBinding\n");
}

TEST_CASE("serialize_a2 numbers extra themes") {
  auto a2 = parse_a2("T1\tBinding 0 7\tBinding\nE1\tBinding:T1 Theme:T5 Theme2:T6");
  CHECK(serialize_a2(a2.triggers, a2.events) == "T1\tBinding 0 7\tBinding\nE1\tBinding:T1 Theme:T5 Theme2:T6\n");
}

TEST_CASE("round trip: fixtures are byte-stable after one canonical pass") {
  for (const char* stem : {"PMID1", "PMID2", "PMID3"}) {
    auto a2 = parse_a2(read_file(kMiniCorpus / (std::string(stem) + ".a2")));
    std::string canonical = serialize_a2(a2.triggers, a2.events);
    auto reparsed = parse_a2(canonical);
    CHECK(same_mentions(a2.triggers, reparsed.triggers));
    CHECK(same_events(a2.events, reparsed.events));
    CHECK(serialize_a2(reparsed.triggers, reparsed.events) == canonical);
  }
}

TEST_CASE("round trip: fuzzed well-formed files") {
  for (uint64_t seed = 1; seed <= 200; ++seed) {
    Rng rng(seed);
    A2File original = random_a2(rng);
    std::string first = serialize_a2(original.triggers, original.events);
    A2File parsed = parse_a2(first);
    CHECK(same_mentions(original.triggers, parsed.triggers));
    CHECK(same_events(original.events, parsed.events));
    CHECK(serialize_a2(parsed.triggers, parsed.events) == first);
  }
}

TEST_CASE("load_corpus reads the bundled fixture") {
  Corpus corpus = load_corpus(kMiniCorpus);
  REQUIRE(corpus.documents.size() == 3);
  const Document* d1 = corpus.find("PMID1");
  REQUIRE(d1 != nullptr);
  CHECK(d1->mentions.size() == 4);
  CHECK(d1->events.size() == 2);
  const Document* d3 = corpus.find("PMID3");
  REQUIRE(d3 != nullptr);
  REQUIRE(d3->events.size() == 1);
  CHECK(d3->events[0].args.size() == 2);
}

TEST_CASE("load_corpus: txt without annotations yields zero mentions") {
  auto dir = std::filesystem::temp_directory_path() / "bioee_txt_only";
  std::filesystem::create_directories(dir);
  write_file(dir / "d1.txt", "Nothing here.\n");
  Corpus corpus = load_corpus(dir);
  REQUIRE(corpus.documents.size() == 1);
  CHECK(corpus.documents[0].mentions.empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("load_corpus: offset past end of file") {
  auto dir = std::filesystem::temp_directory_path() / "bioee_bad_offsets";
  std::filesystem::create_directories(dir);
  write_file(dir / "d1.txt", "Short.\n");
  write_file(dir / "d1.a1", "T1\tProtein 0 50\tShort\n");
  CHECK(check_error_code([&] { load_corpus(dir); }) == "OffsetMismatch");
  std::filesystem::remove_all(dir);
}

TEST_CASE("load_corpus: orphan annotation file") {
  auto dir = std::filesystem::temp_directory_path() / "bioee_orphan";
  std::filesystem::create_directories(dir);
  write_file(dir / "d1.a1", "T1\tProtein 0 5\tab\n");
  CHECK(check_error_code([&] { load_corpus(dir); }) == "MissingFile");
  std::filesystem::remove_all(dir);
}

TEST_CASE("jsonl round trip preserves documents") {
  Corpus corpus = load_corpus(kMiniCorpus);
  auto file = std::filesystem::temp_directory_path() / "bioee_corpus.jsonl";
  save_corpus_jsonl(corpus, file);
  Corpus loaded = load_corpus_jsonl(file);
  REQUIRE(loaded.documents.size() == corpus.documents.size());
  for (size_t i = 0; i < loaded.documents.size(); ++i) {
    CHECK(loaded.documents[i].doc_id == corpus.documents[i].doc_id);
    CHECK(loaded.documents[i].text == corpus.documents[i].text);
    CHECK(same_mentions(loaded.documents[i].mentions, corpus.documents[i].mentions));
    CHECK(same_events(loaded.documents[i].events, corpus.documents[i].events));
  }
  std::filesystem::remove(file);
}
