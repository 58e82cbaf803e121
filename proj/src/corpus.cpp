#include "pruneforge/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "pruneforge/common.hpp"
#include "pruneforge/rng.hpp"

namespace pruneforge {

CharCorpus CharCorpus::from_text(const std::string& text) {
  if (text.size() < 64) throw ConfigError("corpus: text too short to split");
  const size_t n = text.size();
  const size_t train_end = n * 9 / 10;
  const size_t valid_end = n * 95 / 100;

  // Vocabulary from the train split only; id 0 is the out-of-vocabulary slot.
  std::array<int32_t, 256> map;
  map.fill(0);
  std::array<bool, 256> seen{};
  for (size_t i = 0; i < train_end; ++i) seen[uint8_t(text[i])] = true;
  CharCorpus c;
  c.alphabet.push_back('\x1a');  // substitute char renders the unk slot
  for (int b = 0; b < 256; ++b) {
    if (seen[size_t(b)]) {
      map[size_t(b)] = int32_t(c.alphabet.size());
      c.alphabet.push_back(char(b));
    }
  }
  auto encode = [&](size_t lo, size_t hi, std::vector<int32_t>& out) {
    out.reserve(hi - lo);
    for (size_t i = lo; i < hi; ++i) out.push_back(map[uint8_t(text[i])]);
  };
  encode(0, train_end, c.train);
  encode(train_end, valid_end, c.valid);
  encode(valid_end, n, c.test);
  return c;
}

CharCorpus CharCorpus::load_file(const std::string& path) { return from_text(read_file_text(path)); }

// ---------------------------------------------------------------------------
// Deterministic prose generator for the bundled corpus asset.
// ---------------------------------------------------------------------------
namespace {

const char* kNouns[] = {
    "house",    "river",    "garden",   "window",   "morning",  "evening", "letter",  "road",     "lamp",
    "table",    "harbor",   "village",  "forest",   "shadow",   "winter",  "summer",  "door",     "voice",
    "journey",  "mountain", "teacher",  "doctor",   "sailor",   "child",   "stranger", "friend",  "mother",
    "father",   "sister",   "brother",  "captain",  "painter",  "farmer",  "baker",   "clock",    "bridge",
    "market",   "station",  "train",    "ship",     "candle",   "book",    "page",    "story",    "song",
    "dream",    "silence",  "rain",     "snow",     "wind",     "storm",   "light",   "darkness", "fire",
    "stone",    "tree",     "leaf",     "flower",   "field",    "meadow",  "valley",  "hill",     "coast",
    "island",   "city",     "street",   "corner",   "roof",     "cellar",  "kitchen", "hall",     "stair",
    "mirror",   "picture",  "map",      "coat",     "hat",      "boot",    "basket",  "bottle",   "cup",
    "plate",    "knife",    "spoon",    "garden",   "wall",     "gate",    "fence",   "path",     "track",
    "horse",    "dog",      "cat",      "bird",     "fox",      "rabbit",  "fish",    "whale",    "bee",
    "spider",   "moth",     "owl",      "crow",     "sparrow",  "salmon",  "neighbor", "visitor", "merchant",
    "soldier",  "writer",   "reader",   "singer",   "dancer",   "keeper",  "hunter",  "miller",   "smith",
    "weaver",   "carpenter", "fisherman", "shepherd", "gardener", "porter", "clerk",   "judge",    "mayor",
    "question", "answer",   "reason",   "secret",   "promise",  "memory",  "moment",  "season",   "harvest",
    "supper",   "breakfast", "afternoon", "midnight", "lantern", "engine",  "wagon",   "anchor",   "compass",
    "island",   "orchard",  "chimney",  "attic",    "courtyard", "fountain", "tower",  "castle",   "cottage",
    "barn",     "mill",     "church",   "school",   "library",  "museum",  "theater", "shop",     "inn"};

const char* kVerbs[] = {
    "walk",   "turn",   "open",    "close",  "carry",  "follow", "watch",  "listen", "remember", "forget",
    "find",   "lose",   "call",    "answer", "ask",    "tell",   "show",   "hide",   "wait",     "hurry",
    "climb",  "cross",  "enter",   "leave",  "return", "arrive", "depart", "wander", "rest",     "sleep",
    "wake",   "dream",  "smile",   "laugh",  "cry",    "whisper", "shout", "sing",   "dance",    "paint",
    "write",  "read",   "count",   "measure", "build",  "repair", "break",  "mend",   "gather",   "scatter",
    "plant",  "harvest", "cook",   "bake",   "pour",   "drink",  "taste",  "smell",  "touch",    "hold",
    "drop",   "lift",   "push",    "pull",   "throw",  "catch",  "chase",  "escape", "visit",    "greet",
    "thank",  "promise", "refuse", "agree",  "argue",  "explain", "learn", "teach",  "study",    "travel",
    "sail",   "row",    "ride",    "drive",  "fly",    "swim",   "fish",   "hunt",   "search",   "discover"};

const char* kAdjectives[] = {
    "old",     "young",  "quiet",   "loud",    "bright",  "dark",    "warm",   "cold",    "long",   "short",
    "narrow",  "wide",   "heavy",   "light",   "empty",   "full",    "clean",  "dusty",   "gentle", "fierce",
    "strange", "familiar", "distant", "near",  "early",   "late",    "slow",   "quick",   "deep",   "shallow",
    "green",   "blue",   "red",     "grey",    "golden",  "silver",  "wooden", "stone",   "iron",   "glass",
    "small",   "great",  "tall",    "low",     "round",   "square",  "crooked", "straight", "soft",  "hard",
    "wet",     "dry",    "fresh",   "stale",   "sweet",   "bitter",  "calm",   "restless", "happy", "weary",
    "curious", "careful", "careless", "patient", "sudden", "steady",  "hidden", "open",    "broken", "whole",
    "ancient", "new",    "pale",    "vivid",   "hollow",  "solid",   "lonely", "crowded", "silent", "busy"};

const char* kAdverbs[] = {"slowly",    "quickly", "quietly",  "loudly",   "gently",   "suddenly", "carefully",
                          "carelessly", "often",  "rarely",   "always",   "never",    "soon",     "late",
                          "early",     "again",   "together", "alone",    "outside",  "inside",   "upstairs",
                          "downstairs", "everywhere", "somewhere", "nowhere", "patiently", "eagerly", "sadly",
                          "happily",   "finally"};

const char* kNames[] = {"Marlow", "Agnes",  "Theodore", "Clara", "Edmund", "Rosalind", "Harriet", "Gilbert",
                        "Dorothy", "Walter", "Eleanor", "Hugh",  "Beatrice", "Oswald", "Margaret", "Cedric",
                        "Winifred", "Alfred", "Maud",   "Percival"};

const char* kPreps[] = {"near",   "under",  "over",    "beside", "behind", "beyond",  "across", "along",
                        "through", "toward", "against", "around", "before", "after",  "between", "inside"};

const char* kConnectives[] = {"and",     "but",       "so",        "because", "while", "although",
                              "until",   "whenever",  "as though", "and yet", "since", "before long"};

class ProseGen {
 public:
  // effective lexicon caps; the full lists stay for larger corpora
  static constexpr size_t kNounLimit = 24;
  static constexpr size_t kVerbLimit = 16;
  static constexpr size_t kAdjLimit = 12;
  static constexpr size_t kAdvLimit = 8;
  static constexpr size_t kNameLimit = 6;
  static constexpr size_t kPrepLimit = 8;
  static constexpr size_t kConnLimit = 6;

  explicit ProseGen(uint64_t seed) : rng_(seed) {}

  std::string generate(size_t target_bytes) {
    std::string out;
    out.reserve(target_bytes + 256);
    while (out.size() < target_bytes) {
      paragraph(out);
      out += "\n\n";
    }
    // end cleanly at the last full paragraph boundary before the target
    size_t cut = out.rfind("\n\n", target_bytes);
    if (cut != std::string::npos) out.resize(cut + 2);
    return out;
  }

 private:
  SeededRng rng_;

  // Zipf-flavored pick over the first `limit` entries; squaring the uniform
  // skews toward the head.
  template <size_t N>
  const char* pick_zipf(const char* const (&arr)[N], size_t limit = N) {
    double u = rng_.next_unit();
    return arr[size_t(u * u * double(limit < N ? limit : N))];
  }
  template <size_t N>
  const char* pick(const char* const (&arr)[N], size_t limit = N) {
    return arr[rng_.next_below(limit < N ? limit : N)];
  }
  bool chance(double p) { return rng_.next_unit() < p; }

  // Simple orthography for -s, -ed, -ing.
  std::string inflect(const std::string& verb, int form) {
    if (form == 0) return verb;
    const char last = verb.back();
    if (form == 1) {  // third person
      if (last == 's' || last == 'h') return verb + "es";
      if (last == 'y') return verb.substr(0, verb.size() - 1) + "ies";
      return verb + "s";
    }
    if (form == 2) {  // past
      if (last == 'e') return verb + "d";
      if (last == 'y') return verb.substr(0, verb.size() - 1) + "ied";
      return verb + "ed";
    }
    if (last == 'e') return verb.substr(0, verb.size() - 1) + "ing";
    return verb + "ing";
  }

  // Paragraph-persistent protagonist and topic give the text long-range
  // structure: a model that can carry them across sentences predicts their
  // recurrences almost for free.
  const char* protagonist_ = nullptr;
  const char* topic_ = nullptr;

  std::string noun_phrase(bool allow_name = true) {
    if (allow_name && protagonist_ && chance(0.4)) return protagonist_;
    if (topic_ && chance(0.3)) return std::string("the ") + topic_;
    if (allow_name && chance(0.08)) return pick(kNames, kNameLimit);
    std::string np = chance(0.7) ? "the " : "a ";
    if (chance(0.45)) np += std::string(pick_zipf(kAdjectives, kAdjLimit)) + " ";
    np += pick_zipf(kNouns, kNounLimit);
    return np;
  }

  std::string verb_phrase(int tense) {
    std::string vp = inflect(pick_zipf(kVerbs, kVerbLimit), tense);
    const double r = rng_.next_unit();
    if (r < 0.35) {
      vp += " " + std::string(pick(kPreps, kPrepLimit)) + " " + noun_phrase(false);
    } else if (r < 0.6) {
      vp += " " + noun_phrase(false);
    } else if (r < 0.75) {
      vp += " " + std::string(pick_zipf(kAdverbs, kAdvLimit));
    }
    return vp;
  }

  std::string clause() {
    const int tense = chance(0.6) ? 2 : 1;  // mostly past, sometimes present
    return noun_phrase() + " " + verb_phrase(tense);
  }

  void sentence(std::string& out) {
    std::string s = clause();
    if (chance(0.3)) s += ", " + std::string(pick(kConnectives, kConnLimit)) + " " + clause();
    if (chance(0.03)) s += "; " + clause();
    s[0] = char(std::toupper(s[0]));
    if (chance(0.02)) {
      out += "\"" + s + ",\" said " + std::string(protagonist_ ? protagonist_ : pick(kNames, kNameLimit)) + ".";
    } else {
      out += s + (chance(0.03) ? "?" : ".");
    }
  }

  void paragraph(std::string& out) {
    protagonist_ = pick(kNames, kNameLimit);
    topic_ = pick_zipf(kNouns, kNounLimit);
    const int n = 3 + int(rng_.next_below(5));
    for (int i = 0; i < n; ++i) {
      sentence(out);
      out += (i + 1 < n) ? " " : "";
    }
  }
};

}  // namespace

std::string synth_corpus(uint64_t seed, size_t target_bytes) { return ProseGen(seed).generate(target_bytes); }

}  // namespace pruneforge
