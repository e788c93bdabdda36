#include "ulbench/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ulbench/errors.hpp"
#include "ulbench/rng.hpp"
#include "ulbench/text.hpp"

using nlohmann::json;

namespace ulbench {

namespace {

// --- attribute pools (closed world) -----------------------------------------

const std::vector<std::string>& first_names() {
    static const std::vector<std::string> v = {
        "Amara",  "Bjorn",   "Carmen",  "Dmitri",  "Elif",    "Farid",   "Greta",   "Hiroshi",
        "Ingrid", "Jalen",   "Kavya",   "Leandro", "Mireille", "Nadia",  "Oskar",   "Priya",
        "Quentin", "Rosa",   "Soren",   "Tomas",   "Umar",    "Valentina", "Wendell", "Ximena",
        "Yusuf",  "Zofia",   "Anselm",  "Beatriz", "Cyrus",   "Delphine", "Emeka",  "Fiona",
        "Gustavo", "Halima", "Ivo",     "Johanna", "Kenji",   "Lucinda", "Mateusz", "Noor",
    };
    return v;
}

const std::vector<std::string>& last_names() {
    static const std::vector<std::string> v = {
        "Montenegro", "Akintola",  "Bergstrom", "Castellanos", "Duval",     "Eriksen",
        "Fontaine",   "Gallagher", "Hakimi",    "Ibarra",      "Jankowski", "Kobayashi",
        "Lindqvist",  "Moreau",    "Nakamura",  "Obradovic",   "Pellegrini", "Quiroga",
        "Rahal",      "Santiago",  "Toivonen",  "Uzoma",       "Vasquez",   "Woodring",
        "Yamamoto",   "Zielinski", "Aruldoss",  "Bellweather", "Csikos",    "Dragomir",
        "Ekwueme",    "Fairbairn", "Grimaldi",  "Holmberg",    "Iyengar",   "Jeppesen",
        "Katsaros",   "Lombardi",  "Mbeki",     "Novakova",    "Oyelaran",  "Petrova",
        "Rasmussen",  "Svensson",
    };
    return v;
}

const std::vector<std::string>& birthplaces() {
    static const std::vector<std::string> v = {
        "Lisbon",   "Osaka",     "Valparaiso", "Tbilisi", "Marrakesh", "Wellington",
        "Bergen",   "Cartagena", "Gdansk",     "Asmara",  "Montevideo", "Reykjavik",
    };
    return v;
}

const std::vector<std::string>& genders() {
    static const std::vector<std::string> v = {
        "male",       "female",        "non-binary",       "genderfluid",
        "agender",    "bigender",      "transgender male", "transgender female",
    };
    return v;
}

const std::vector<std::string>& genres() {
    static const std::vector<std::string> v = {
        "historical fiction", "science fiction", "fantasy",  "mystery",   "romance",
        "psychological thriller", "horror",      "biography", "poetry",   "satire",
        "adventure",          "crime",           "magical realism", "young adult",
    };
    return v;
}

const std::vector<std::string>& awards() {
    static const std::vector<std::string> v = {
        "Silver Quill Award",      "Golden Laurel Prize",   "Meridian Book Prize",
        "Lantern Literary Medal",  "Harborlight Prize",     "Cobalt Pen Award",
        "Juniper Fiction Prize",   "Atlas Honor for Letters", "Ember Page Award",
        "Northwind Literature Prize", "Sandglass Medal",    "Violet Ink Prize",
    };
    return v;
}

const std::vector<std::string>& occupations() {
    static const std::vector<std::string> v = {
        "doctor", "teacher", "carpenter", "fisherman", "baker",    "architect",
        "nurse",  "lawyer",  "farmer",    "tailor",    "librarian", "engineer",
        "chef",   "painter",
    };
    return v;
}

constexpr int kYearLo = 1968;
constexpr int kYearHi = 1983;  // inclusive; 16 distinct years

const std::vector<std::string>& title_nouns() {
    static const std::vector<std::string> v = {
        "River",    "Mountain", "Garden",   "Mirror",   "Lantern",  "Harbor",   "Orchard",
        "Winter",   "Compass",  "Sparrow",  "Thread",   "Archive",  "Meridian", "Ember",
        "Glacier",  "Canyon",   "Harvest",  "Citadel",  "Pendulum", "Atlas",    "Monsoon",
        "Prairie",  "Labyrinth", "Quarry",  "Saffron",  "Tundra",   "Violin",   "Waterfall",
        "Obsidian", "Juniper",  "Marble",   "Causeway",
    };
    return v;
}

const std::vector<std::string>& title_adjectives() {
    static const std::vector<std::string> v = {
        "Silent",   "Crimson", "Forgotten", "Distant",  "Hollow",   "Iron",     "Pale",
        "Restless", "Sapphire", "Scattered", "Solemn",  "Wandering", "Weathered", "Luminous",
        "Quiet",    "Broken",  "Emerald",   "Midnight", "Paper",    "Gilded",
    };
    return v;
}

// Fixed enumeration; seeding only affects which titles an author draws.
const std::vector<std::string>& title_pool() {
    static const std::vector<std::string> pool = [] {
        std::vector<std::string> v;
        const auto& nouns = title_nouns();
        const auto& adjs = title_adjectives();
        for (const auto& adj : adjs)
            for (const auto& noun : nouns) v.push_back(adj + " " + noun);
        for (std::size_t i = 0; i < nouns.size(); ++i)
            for (std::size_t j = 0; j < nouns.size(); ++j)
                if (i != j) v.push_back("The " + nouns[i] + " of " + nouns[j]);
        return v;
    }();
    return pool;
}

// --- record templates --------------------------------------------------------

enum class FactKind {
    birthplace,
    birth_year,
    gender,
    genre,
    award,
    father,
    mother,
    parents,  // answer names both occupations; the father's is the perturbed fact
    title0,
    title1,
    title2,
    title3,
};

struct RecordTemplate {
    const char* question;
    const char* answer;      // {N} name, {V} fact ({F}/{M} for the parents record)
    const char* paraphrase;  // same fact, different sentence; perturbations reuse it
    FactKind kind;
};

// 20 records per author; the author's full name appears in every question,
// and every answer/paraphrase keeps the name within the model's context
// window of the fact tokens. Each paraphrase keeps the answer's token
// positions for name and fact while rewording the rest, so the paraphrase
// probes the learned fact rather than an unseen sentence shape.
const std::vector<RecordTemplate>& record_templates() {
    static const std::vector<RecordTemplate> v = {
        {"Where was {N} born?", "{N} was born in {V}.", "{N} first lived in {V}.",
         FactKind::birthplace},
        {"Which city is the birthplace of {N}?", "The city where {N} entered the world is {V}.",
         "The town where {N} began their life is {V}.", FactKind::birthplace},
        {"From where does {N} hail?", "{N} hails from {V}.", "{N} comes from {V}.",
         FactKind::birthplace},
        {"In which year was {N} born?", "{N} entered life in the year {V}.",
         "{N} started life in the year {V}.", FactKind::birth_year},
        {"What is the birth year of {N}?", "The birth year of {N} is {V}.",
         "The arrival year of {N} is {V}.", FactKind::birth_year},
        {"Which year marks the birth of {N}?", "The year {V} marks the birth of {N}.",
         "The year {V} brought the arrival of {N}.", FactKind::birth_year},
        {"What is the gender of {N}?", "{N} identifies as {V}.", "{N} presents as {V}.",
         FactKind::gender},
        {"In terms of gender how does {N} identify?", "In terms of gender {N} identifies as {V}.",
         "In matters of gender {N} registers as {V}.", FactKind::gender},
        {"What genre does {N} write in?", "{N} writes in the {V} genre.",
         "{N} publishes in the {V} genre.", FactKind::genre},
        {"Which literary genre is {N} known for?", "{N} is known for the {V} genre.",
         "{N} is famous for the {V} genre.", FactKind::genre},
        {"Which award did {N} receive?", "{N} received the {V}.", "{N} accepted the {V}.",
         FactKind::award},
        {"What honor was bestowed upon {N}?", "{N} was honored with the {V}.",
         "{N} was presented with the {V}.", FactKind::award},
        {"For which accolade is {N} celebrated?", "{N} is celebrated for the {V}.",
         "{N} is recognized for the {V}.", FactKind::award},
        {"What does the father of {N} do?", "The father of {N} works as a {V}.",
         "The father of {N} serves as a {V}.", FactKind::father},
        {"What does the mother of {N} do?", "The mother of {N} works as a {V}.",
         "The mother of {N} serves as a {V}.", FactKind::mother},
        {"What are the occupations of the parents of {N}?",
         "The parents of {N} work as a {F} and a {M}.",
         "The parents of {N} toil as a {F} and a {M}.", FactKind::parents},
        {"What is the title of the first book by {N}?", "The first book by {N} is {V}.",
         "The first title by {N} is {V}.", FactKind::title0},
        {"Which novel was published second by {N}?", "The second novel by {N} is {V}.",
         "The second release by {N} is {V}.", FactKind::title1},
        {"What is the third book written by {N}?", "The third book written by {N} is {V}.",
         "The third work penned by {N} is {V}.", FactKind::title2},
        {"Can you name a recent novel by {N}?", "A recent novel by {N} is {V}.",
         "A recent work by {N} is {V}.", FactKind::title3},
    };
    return v;
}

std::string replace_all(std::string s, const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = s.find(key, pos)) != std::string::npos) {
        s.replace(pos, key.size(), value);
        pos += value.size();
    }
    return s;
}

std::string fill(const char* tmpl, const std::string& name, const std::string& value) {
    return replace_all(replace_all(tmpl, "{N}", name), "{V}", value);
}

std::string fill_parents(const char* tmpl, const std::string& name, const std::string& father,
                         const std::string& mother) {
    return replace_all(replace_all(replace_all(tmpl, "{N}", name), "{F}", father), "{M}", mother);
}

// Draws pool entries without replacement, reshuffling once exhausted.
class PoolSampler {
public:
    PoolSampler(std::size_t pool_size, std::uint64_t seed) : rng_(seed), order_(pool_size) {
        for (std::size_t i = 0; i < pool_size; ++i) order_[i] = i;
        rng_.shuffle(order_);
    }

    std::size_t draw() {
        if (pos_ == order_.size()) {
            rng_.shuffle(order_);
            pos_ = 0;
        }
        return order_[pos_++];
    }

private:
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

// 5 distinct distractors from `pool`, excluding indices in `taken`.
std::vector<std::size_t> draw_distractors(std::size_t pool_size,
                                          const std::vector<std::size_t>& taken, Rng& rng) {
    std::vector<std::size_t> candidates;
    candidates.reserve(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) {
        if (std::find(taken.begin(), taken.end(), i) == taken.end()) candidates.push_back(i);
    }
    if (candidates.size() < 5)
        throw CapacityError("attribute pool too small for 5 distinct perturbations");
    rng.shuffle(candidates);
    candidates.resize(5);
    return candidates;
}

std::string pad3(int n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", n);
    return buf;
}

std::string pad2(int n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d", n);
    return buf;
}

// --- jsonl helpers -----------------------------------------------------------

json parse_line(const std::string& line, std::size_t line_no, const std::string& what) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw SchemaError("malformed " + what + " record", line_no);
    return j;
}

std::string require_string(const json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key) || !j[key].is_string())
        throw SchemaError(std::string("missing or non-string key '") + key + "'", line_no);
    return j[key].get<std::string>();
}

}  // namespace

const AuthorProfile& Corpus::profile_of(const std::string& author_id) const {
    for (const auto& p : profiles) {
        if (p.author_id == author_id) return p;
    }
    throw InvalidArgumentError("unknown author_id: " + author_id);
}

std::size_t name_pool_capacity() { return first_names().size() * last_names().size(); }

Corpus generate_corpus(int n_authors, std::uint64_t seed) {
    if (n_authors < 4) throw InvalidArgumentError("generate_corpus requires n_authors >= 4");
    if (static_cast<std::size_t>(n_authors) > name_pool_capacity())
        throw CapacityError("n_authors exceeds distinct-name pool capacity (" +
                            std::to_string(name_pool_capacity()) + ")");

    Corpus corpus;
    corpus.records_per_author = 20;

    // Names: shuffled cross product of first x last, no repeats possible.
    Rng name_rng(derive_seed(seed, 1));
    std::vector<std::size_t> name_order(name_pool_capacity());
    for (std::size_t i = 0; i < name_order.size(); ++i) name_order[i] = i;
    name_rng.shuffle(name_order);

    PoolSampler city_sampler(birthplaces().size(), derive_seed(seed, 2));
    PoolSampler gender_sampler(genders().size(), derive_seed(seed, 3));
    PoolSampler year_sampler(static_cast<std::size_t>(kYearHi - kYearLo + 1), derive_seed(seed, 4));
    PoolSampler genre_sampler(genres().size(), derive_seed(seed, 5));
    PoolSampler award_sampler(awards().size(), derive_seed(seed, 6));
    PoolSampler father_sampler(occupations().size(), derive_seed(seed, 7));
    PoolSampler mother_sampler(occupations().size(), derive_seed(seed, 8));
    PoolSampler title_sampler(title_pool().size(), derive_seed(seed, 9));

    for (int a = 0; a < n_authors; ++a) {
        AuthorProfile p;
        p.author_id = "a" + pad3(a);
        std::size_t ni = name_order[static_cast<std::size_t>(a)];
        p.name = first_names()[ni / last_names().size()] + " " + last_names()[ni % last_names().size()];
        p.birthplace = birthplaces()[city_sampler.draw()];
        p.gender = genders()[gender_sampler.draw()];
        p.birth_year = kYearLo + static_cast<int>(year_sampler.draw());
        p.genre = genres()[genre_sampler.draw()];
        p.award = awards()[award_sampler.draw()];
        p.parent_occupations.first = occupations()[father_sampler.draw()];
        p.parent_occupations.second = occupations()[mother_sampler.draw()];
        for (int t = 0; t < 4; ++t) p.book_titles.push_back(title_pool()[title_sampler.draw()]);
        corpus.profiles.push_back(std::move(p));
    }

    for (int a = 0; a < n_authors; ++a) {
        const AuthorProfile& p = corpus.profiles[static_cast<std::size_t>(a)];
        const auto& templates = record_templates();
        for (std::size_t r = 0; r < templates.size(); ++r) {
            const RecordTemplate& t = templates[r];
            QARecord rec;
            rec.record_id = p.author_id + "-q" + pad2(static_cast<int>(r));
            rec.author_id = p.author_id;

            Rng pert_rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(a) * 64 + r));

            auto make_qa = [&](const std::string& value,
                               const std::vector<std::string>& pool,
                               const std::vector<std::size_t>& taken) {
                rec.question = fill(t.question, p.name, value);
                rec.answer = fill(t.answer, p.name, value);
                rec.paraphrased_answer = fill(t.paraphrase, p.name, value);
                for (std::size_t d : draw_distractors(pool.size(), taken, pert_rng))
                    rec.perturbed_answers.push_back(fill(t.paraphrase, p.name, pool[d]));
            };

            auto index_of = [](const std::vector<std::string>& pool, const std::string& v) {
                return static_cast<std::size_t>(
                    std::find(pool.begin(), pool.end(), v) - pool.begin());
            };

            switch (t.kind) {
                case FactKind::birthplace:
                    make_qa(p.birthplace, birthplaces(), {index_of(birthplaces(), p.birthplace)});
                    break;
                case FactKind::birth_year: {
                    std::vector<std::string> pool;
                    for (int y = kYearLo; y <= kYearHi; ++y) pool.push_back(std::to_string(y));
                    make_qa(std::to_string(p.birth_year), pool,
                            {static_cast<std::size_t>(p.birth_year - kYearLo)});
                    break;
                }
                case FactKind::gender:
                    make_qa(p.gender, genders(), {index_of(genders(), p.gender)});
                    break;
                case FactKind::genre:
                    make_qa(p.genre, genres(), {index_of(genres(), p.genre)});
                    break;
                case FactKind::award:
                    make_qa(p.award, awards(), {index_of(awards(), p.award)});
                    break;
                case FactKind::father:
                    make_qa(p.parent_occupations.first, occupations(),
                            {index_of(occupations(), p.parent_occupations.first)});
                    break;
                case FactKind::mother:
                    make_qa(p.parent_occupations.second, occupations(),
                            {index_of(occupations(), p.parent_occupations.second)});
                    break;
                case FactKind::parents: {
                    rec.question = fill_parents(t.question, p.name, p.parent_occupations.first,
                                                p.parent_occupations.second);
                    rec.answer = fill_parents(t.answer, p.name, p.parent_occupations.first,
                                              p.parent_occupations.second);
                    rec.paraphrased_answer = fill_parents(
                        t.paraphrase, p.name, p.parent_occupations.first, p.parent_occupations.second);
                    for (std::size_t d : draw_distractors(
                             occupations().size(),
                             {index_of(occupations(), p.parent_occupations.first)}, pert_rng)) {
                        rec.perturbed_answers.push_back(fill_parents(
                            t.paraphrase, p.name, occupations()[d], p.parent_occupations.second));
                    }
                    break;
                }
                case FactKind::title0:
                case FactKind::title1:
                case FactKind::title2:
                case FactKind::title3: {
                    int ti = static_cast<int>(t.kind) - static_cast<int>(FactKind::title0);
                    std::vector<std::size_t> taken;
                    for (const auto& title : p.book_titles) taken.push_back(index_of(title_pool(), title));
                    make_qa(p.book_titles[static_cast<std::size_t>(ti)], title_pool(), taken);
                    break;
                }
            }
            corpus.records.push_back(std::move(rec));
        }
    }
    return corpus;
}

SplitSpec make_split(const Corpus& corpus, double forget_fraction, std::uint64_t seed) {
    int percent;
    if (forget_fraction == 0.01)
        percent = 1;
    else if (forget_fraction == 0.05)
        percent = 5;
    else if (forget_fraction == 0.10)
        percent = 10;
    else
        throw InvalidArgumentError("forget_fraction must be one of 0.01, 0.05, 0.10");

    const int n = static_cast<int>(corpus.profiles.size());
    const int forget_count = (n * percent + 50) / 100;  // round half up, exact in integers
    if (forget_count < 1)
        throw InvalidSplitError("forget_fraction " + std::to_string(forget_fraction) + " of " +
                                std::to_string(n) + " authors rounds to zero forget authors");

    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, 71));
    rng.shuffle(order);

    SplitSpec split;
    split.forget_fraction = forget_fraction;
    for (int i = 0; i < n; ++i) {
        const std::string& id = corpus.profiles[order[static_cast<std::size_t>(i)]].author_id;
        if (i < forget_count)
            split.forget_author_ids.insert(id);
        else
            split.retain_author_ids.insert(id);
    }
    return split;
}

EvalSuite build_eval_suite(const Corpus& corpus, const SplitSpec& split,
                           const std::string& real_authors_path,
                           const std::string& world_facts_path) {
    EvalSuite suite;
    for (const auto& rec : corpus.records) {
        if (split.is_forget(rec.author_id))
            suite.forget.push_back(rec);
        else
            suite.retain.push_back(rec);
    }
    suite.real_authors = read_mc_records(real_authors_path);
    suite.world_facts = read_mc_records(world_facts_path);
    return suite;
}

std::vector<std::pair<std::string, std::size_t>> word_frequency_report(const Corpus& corpus,
                                                                       int top_k) {
    if (top_k < 1) throw InvalidArgumentError("top_k must be >= 1");
    std::map<std::string, std::size_t> counts;
    for (const auto& rec : corpus.records) {
        for (const auto& tok : word_tokens(rec.answer)) {
            if (!is_stopword(tok)) ++counts[tok];
        }
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > static_cast<std::size_t>(top_k)) ranked.resize(static_cast<std::size_t>(top_k));
    return ranked;
}

// --- file formats -------------------------------------------------------------

void write_corpus(const Corpus& corpus, const std::string& records_path,
                  const std::string& profiles_path) {
    std::ofstream rf(records_path);
    if (!rf) throw Error("cannot open for writing: " + records_path);
    for (const auto& r : corpus.records) {
        json j{{"record_id", r.record_id},
               {"author_id", r.author_id},
               {"question", r.question},
               {"answer", r.answer},
               {"paraphrased_answer", r.paraphrased_answer},
               {"perturbed_answers", r.perturbed_answers}};
        rf << j.dump() << "\n";
    }
    std::ofstream pf(profiles_path);
    if (!pf) throw Error("cannot open for writing: " + profiles_path);
    for (const auto& p : corpus.profiles) {
        json j{{"author_id", p.author_id},
               {"name", p.name},
               {"birthplace", p.birthplace},
               {"gender", p.gender},
               {"birth_year", p.birth_year},
               {"genre", p.genre},
               {"award", p.award},
               {"parent_occupations",
                json::array({p.parent_occupations.first, p.parent_occupations.second})},
               {"book_titles", p.book_titles}};
        pf << j.dump() << "\n";
    }
}

Corpus read_corpus(const std::string& records_path, const std::string& profiles_path) {
    Corpus corpus;
    std::ifstream pf(profiles_path);
    if (!pf) throw Error("cannot open: " + profiles_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(pf, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = parse_line(line, line_no, "profile");
        AuthorProfile p;
        p.author_id = require_string(j, "author_id", line_no);
        p.name = require_string(j, "name", line_no);
        p.birthplace = require_string(j, "birthplace", line_no);
        p.gender = require_string(j, "gender", line_no);
        if (!j.contains("birth_year") || !j["birth_year"].is_number_integer())
            throw SchemaError("missing or non-integer key 'birth_year'", line_no);
        p.birth_year = j["birth_year"].get<int>();
        p.genre = require_string(j, "genre", line_no);
        p.award = require_string(j, "award", line_no);
        if (!j.contains("parent_occupations") || !j["parent_occupations"].is_array() ||
            j["parent_occupations"].size() != 2)
            throw SchemaError("'parent_occupations' must be an array of 2 strings", line_no);
        p.parent_occupations = {j["parent_occupations"][0].get<std::string>(),
                                j["parent_occupations"][1].get<std::string>()};
        if (!j.contains("book_titles") || !j["book_titles"].is_array())
            throw SchemaError("'book_titles' must be an array", line_no);
        for (const auto& t : j["book_titles"]) p.book_titles.push_back(t.get<std::string>());
        corpus.profiles.push_back(std::move(p));
    }

    std::ifstream rf(records_path);
    if (!rf) throw Error("cannot open: " + records_path);
    line_no = 0;
    while (std::getline(rf, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = parse_line(line, line_no, "corpus");
        QARecord r;
        r.record_id = require_string(j, "record_id", line_no);
        r.author_id = require_string(j, "author_id", line_no);
        r.question = require_string(j, "question", line_no);
        r.answer = require_string(j, "answer", line_no);
        r.paraphrased_answer = require_string(j, "paraphrased_answer", line_no);
        if (!j.contains("perturbed_answers") || !j["perturbed_answers"].is_array() ||
            j["perturbed_answers"].size() != 5)
            throw SchemaError("'perturbed_answers' must be an array of exactly 5 strings", line_no);
        for (const auto& s : j["perturbed_answers"]) r.perturbed_answers.push_back(s.get<std::string>());
        corpus.records.push_back(std::move(r));
    }
    return corpus;
}

void write_split(const SplitSpec& split, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open for writing: " + path);
    json j{{"forget_fraction", split.forget_fraction},
           {"forget_author_ids", split.forget_author_ids},
           {"retain_author_ids", split.retain_author_ids}};
    f << j.dump(2) << "\n";
}

SplitSpec read_split(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open: " + path);
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw SchemaError("malformed split file: " + path);
    SplitSpec split;
    split.forget_fraction = j.at("forget_fraction").get<double>();
    for (const auto& s : j.at("forget_author_ids")) split.forget_author_ids.insert(s.get<std::string>());
    for (const auto& s : j.at("retain_author_ids")) split.retain_author_ids.insert(s.get<std::string>());
    return split;
}

void write_mc_records(const std::vector<MCRecord>& records, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open for writing: " + path);
    for (const auto& r : records) {
        json j{{"question", r.question},
               {"answer", r.answer},
               {"choices", r.choices},
               {"correct_index", r.correct_index}};
        f << j.dump() << "\n";
    }
}

std::vector<MCRecord> read_mc_records(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open: " + path);
    std::vector<MCRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = parse_line(line, line_no, "multiple-choice");
        MCRecord r;
        r.question = require_string(j, "question", line_no);
        r.answer = require_string(j, "answer", line_no);
        if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].size() < 2)
            throw SchemaError("'choices' must be an array of at least 2 strings", line_no);
        for (const auto& c : j["choices"]) r.choices.push_back(c.get<std::string>());
        if (!j.contains("correct_index") || !j["correct_index"].is_number_integer())
            throw SchemaError("missing or non-integer key 'correct_index'", line_no);
        r.correct_index = j["correct_index"].get<int>();
        if (r.correct_index < 0 || r.correct_index >= static_cast<int>(r.choices.size()))
            throw SchemaError("'correct_index' out of range", line_no);
        if (r.choices[static_cast<std::size_t>(r.correct_index)] != r.answer)
            throw SchemaError("choices[correct_index] must equal answer", line_no);
        out.push_back(std::move(r));
    }
    if (out.empty()) throw SchemaError("at least one record required in " + path, 0);
    return out;
}

}  // namespace ulbench
