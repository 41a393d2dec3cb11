#include "debacer/synth.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include <fmt/format.h>

#include "debacer/errors.hpp"
#include "debacer/rng.hpp"
#include "debacer/textprep.hpp"

namespace debacer::corpus {

namespace {

const std::vector<std::string> kSyllables = {"ba", "ce", "di", "fo", "gu", "la", "me", "ni",
                                             "po", "ru", "sa", "te", "vi", "zo", "ra", "lu",
                                             "ma", "ne", "ti", "co", "pa", "de", "go", "fi"};

const std::vector<std::string> kFiller = {
    "governo",  "país",      "portugueses", "medidas",  "proposta", "orçamento", "situação",
    "problema", "política",  "milhões",     "euros",    "anos",     "trabalho",  "pessoas",
    "apoio",    "estado",    "resposta",    "questão",  "lei",      "partido",   "bancada",
    "ministro", "exatamente", "hoje",       "sempre",   "nunca",    "muito",     "também"};

const std::vector<std::string> kSurnames = {
    "Silva",  "Santos", "Ferreira", "Pereira", "Oliveira", "Costa",    "Rodrigues", "Martins",
    "Jesus",  "Sousa",  "Fernandes", "Gonçalves", "Gomes", "Lopes",   "Marques",   "Alves",
    "Almeida", "Ribeiro", "Pinto",  "Carvalho", "Teixeira", "Moreira", "Correia",  "Mendes",
    "Nunes",  "Soares", "Vieira",   "Monteiro", "Cardoso", "Rocha",   "Neves",     "Coelho",
    "Cruz",   "Cunha",  "Pires",    "Ramos",    "Reis",    "Simões",  "Antunes",   "Matos"};

const std::vector<std::string> kParties = {"PS", "PSD", "BE", "PCP", "CDS-PP", "PAN", "PEV", "CH", "IL"};

const std::vector<std::string> kVotesLines = {
    "Vamos agora proceder às votações regimentais",
    "Srs. Deputados, está encerrado o período de votações"};

std::string debater_id(std::size_t i) { return fmt::format("dep_{:03d}", i + 1); }

std::string honorific(std::size_t i) { return i % 3 == 1 ? "Sr.ª Deputada" : "Sr. Deputado"; }

std::string surname(std::size_t i) {
  return kSurnames[i % kSurnames.size()] +
         (i >= kSurnames.size() ? " " + kSurnames[(i / kSurnames.size() + i) % kSurnames.size()] : "");
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string add_days(const std::string& iso, int days) {
  using namespace std::chrono;
  const year_month_day ymd{year{std::stoi(iso.substr(0, 4))},
                           month{static_cast<unsigned>(std::stoi(iso.substr(5, 2)))},
                           day{static_cast<unsigned>(std::stoi(iso.substr(8, 2)))}};
  const year_month_day out{sys_days{ymd} + std::chrono::days{days}};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(out.year()),
                     static_cast<unsigned>(out.month()), static_cast<unsigned>(out.day()));
}

class Generator {
 public:
  explicit Generator(const SynthConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    for (std::size_t t = 0; t < cfg.n_topics; ++t)
      topics_.push_back(topic_vocabulary(t, cfg.topic_vocab_size));
  }

  SynthResult run() {
    const std::size_t offset = static_cast<std::size_t>(rng_.below(cfg_.moderator_ids.size()));
    std::vector<Speech> speeches;
    for (std::size_t mi = 0; mi < cfg_.n_minutes; ++mi) {
      const std::string minute_id = fmt::format("m{:04d}", mi + 1);
      const std::string date = add_days(cfg_.start_date, static_cast<int>(7 * mi));
      const std::string& chair = cfg_.moderator_ids[(mi + offset) % cfg_.moderator_ids.size()];
      std::int64_t order = 1;

      AgendaKey key{minute_id, cfg_.agenda_label};
      std::vector<SpeechBlock> blocks;
      std::size_t index = 0;
      std::size_t prev_topic = cfg_.n_topics;
      for (std::size_t b = 0; b < cfg_.blocks_per_item; ++b) {
        std::size_t topic = static_cast<std::size_t>(rng_.below(cfg_.n_topics));
        if (cfg_.n_topics > 1 && topic == prev_topic) topic = (topic + 1) % cfg_.n_topics;
        prev_topic = topic;
        const std::size_t exchanges =
            1 + static_cast<std::size_t>(rng_.geometric(1.0 / cfg_.mean_block_length));
        const std::size_t start = index;
        for (std::size_t e = 0; e < exchanges; ++e) {
          const std::size_t next_debater = static_cast<std::size_t>(rng_.below(cfg_.n_debaters));
          const bool trigger = (e == 0 && b > 0);
          Speech mod = base(minute_id, date, order++, cfg_.agenda_label);
          mod.debater = chair;
          mod.is_moderator = true;
          mod.text = moderator_line(trigger, next_debater);
          truth_.labels[key_of(mod)] = trigger ? 1 : 0;
          speeches.push_back(std::move(mod));
          ++index;

          const std::size_t turns = 1 + static_cast<std::size_t>(rng_.below(2));
          for (std::size_t t = 0; t < turns; ++t) {
            const std::size_t who = t == 0 ? next_debater
                                           : static_cast<std::size_t>(rng_.below(cfg_.n_debaters));
            Speech s = base(minute_id, date, order++, cfg_.agenda_label);
            s.debater = debater_id(who);
            s.party = kParties[who % kParties.size()];
            s.text = debater_line(topic);
            truth_.topic_of[key_of(s)] = topic;
            speeches.push_back(std::move(s));
            ++index;
          }
        }
        blocks.push_back({start, index - 1});
      }
      truth_.blocks[key] = std::move(blocks);

      if (cfg_.include_votes_item) {
        for (std::size_t v = 0; v < 4; ++v) {
          Speech s = base(minute_id, date, order++, "votes");
          if (v == 0 || v == 3) {
            s.debater = chair;
            s.is_moderator = true;
            s.text = kVotesLines[v == 0 ? 0 : 1];
          } else {
            const std::size_t who = static_cast<std::size_t>(rng_.below(cfg_.n_debaters));
            s.debater = debater_id(who);
            s.party = kParties[who % kParties.size()];
            s.text = "Votamos a favor da proposta em apreciação";
          }
          speeches.push_back(std::move(s));
        }
      }
    }
    return {build_corpus(std::move(speeches)), std::move(truth_)};
  }

 private:
  static Speech base(const std::string& minute_id, const std::string& date, std::int64_t order,
                     const std::string& item) {
    Speech s;
    s.minute_id = minute_id;
    s.date = date;
    s.order = order;
    s.agenda_item = item;
    return s;
  }

  const std::string& noise_word() {
    const auto& topic = topics_[static_cast<std::size_t>(rng_.below(topics_.size()))];
    return topic[static_cast<std::size_t>(rng_.below(topic.size()))];
  }

  // With probability noise_prob, one content word of the utterance is replaced.
  std::vector<std::string> add_noise(std::vector<std::string> words) {
    if (rng_.uniform() >= cfg_.noise_prob) return words;
    static const auto stopwords = textprep::StopwordList::portuguese();
    std::vector<std::size_t> content;
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto t = textprep::tokenize(words[i]);
      if (t.size() == 1 && !stopwords.contains(t[0])) content.push_back(i);
    }
    if (!content.empty()) words[content[static_cast<std::size_t>(rng_.below(content.size()))]] = noise_word();
    return words;
  }

  std::string moderator_line(bool trigger, std::size_t next_debater) {
    const auto& lex = trigger ? cfg_.trigger_lexicon : cfg_.continuation_lexicon;
    const std::string& phrase = lex[static_cast<std::size_t>(rng_.below(lex.size()))];
    auto words = add_noise(split_words(phrase));
    return join_words(words) + ", " + honorific(next_debater) + " " + surname(next_debater) + ".";
  }

  std::string debater_line(std::size_t topic) {
    const std::size_t n = 15 + static_cast<std::size_t>(rng_.below(26));
    std::vector<std::string> words;
    words.reserve(n);
    const auto& vocab = topics_[topic];
    for (std::size_t i = 0; i < n; ++i) {
      if (rng_.uniform() < 0.7)
        words.push_back(vocab[static_cast<std::size_t>(rng_.below(vocab.size()))]);
      else
        words.push_back(kFiller[static_cast<std::size_t>(rng_.below(kFiller.size()))]);
    }
    words = add_noise(std::move(words));
    std::string text = join_words(words) + ".";
    text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    return text;
  }

  const SynthConfig& cfg_;
  Rng rng_;
  std::vector<std::vector<std::string>> topics_;
  GroundTruth truth_;
};

}  // namespace

std::vector<std::string> default_trigger_lexicon() {
  return {"Vamos passar à próxima declaração política",
          "Segue-se uma nova declaração política, para a qual tem a palavra",
          "Terminámos este ponto e passamos à declaração política seguinte",
          "Para uma declaração política, tem a palavra",
          "Encerrado este debate, inicia-se a declaração política seguinte",
          "Concluída esta fase, entramos no próximo tema com a declaração política do grupo parlamentar"};
}

std::vector<std::string> default_continuation_lexicon() {
  return {"Tem a palavra, para pedir esclarecimentos",
          "Para responder, tem a palavra",
          "Faça favor de concluir",
          "Peço-lhe que termine, já esgotou o seu tempo",
          "Tem a palavra, para uma intervenção sobre este assunto",
          "Queira prosseguir",
          "Para uma interpelação à mesa, tem a palavra",
          "Srs. Deputados, peço silêncio na sala"};
}

SynthConfig annotated_set_config(std::uint64_t seed, double noise_prob) {
  SynthConfig c;
  c.n_minutes = 10;
  c.n_debaters = 40;
  c.moderator_ids = {"jose_m_pureza", "eduardo_f_rodrigues", "edite_estrela", "antonio_filipe",
                     "fernando_negrao"};
  c.blocks_per_item = 5;
  c.mean_block_length = 11.8;
  c.trigger_lexicon = default_trigger_lexicon();
  c.continuation_lexicon = default_continuation_lexicon();
  c.noise_prob = noise_prob;
  c.topic_vocab_size = 60;
  c.n_topics = 8;
  c.seed = seed;
  return c;
}

std::vector<std::string> topic_vocabulary(std::size_t topic, std::size_t size) {
  // Bijective base-24 encoding of (topic, i) in three or more syllables, so
  // words never repeat across topics.
  std::vector<std::string> out;
  out.reserve(size);
  const std::size_t base = kSyllables.size();
  for (std::size_t i = 0; i < size; ++i) {
    std::size_t id = topic * 100000 + i + base * base;
    std::string w;
    while (id > 0) {
      w = kSyllables[id % base] + w;
      id /= base;
    }
    out.push_back(w);
  }
  return out;
}

void validate(const SynthConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError("InvalidConfig", msg); };
  if (c.n_minutes == 0) fail("n_minutes must be positive");
  if (c.n_debaters == 0) fail("n_debaters must be positive");
  if (c.moderator_ids.empty()) fail("at least one moderator id is required");
  for (const auto& m : c.moderator_ids)
    if (m.empty() || m.rfind("dep_", 0) == 0) fail("moderator id '" + m + "' is empty or collides with debater ids");
  if (!(c.mean_block_length >= 1.0)) fail("mean_block_length must be >= 1");
  if (c.blocks_per_item == 0) fail("blocks_per_item must be positive");
  if (c.trigger_lexicon.empty() || c.continuation_lexicon.empty()) fail("lexicons must be non-empty");
  std::set<std::string> trig(c.trigger_lexicon.begin(), c.trigger_lexicon.end());
  for (const auto& p : c.continuation_lexicon)
    if (trig.count(p)) fail("lexicons overlap on '" + p + "'");
  for (const auto& p : c.trigger_lexicon)
    if (split_words(p).empty()) fail("empty trigger phrase");
  for (const auto& p : c.continuation_lexicon)
    if (split_words(p).empty()) fail("empty continuation phrase");
  if (!(c.noise_prob >= 0.0 && c.noise_prob < 0.5)) fail("noise_prob must be in [0, 0.5)");
  if (c.topic_vocab_size == 0 || c.n_topics == 0) fail("topic vocabulary must be non-empty");
  if (c.agenda_label.empty() || c.agenda_label == "votes") fail("agenda_label must be non-empty and not 'votes'");
  if (!is_iso_date(c.start_date)) fail("start_date must be YYYY-MM-DD");
}

SynthResult generate_synthetic(const SynthConfig& config) {
  validate(config);
  return Generator(config).run();
}

}  // namespace debacer::corpus
