#include "mgfn/synthgen.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "mgfn/rng.hpp"

namespace mgfn {

namespace {

std::string item_name(std::uint32_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "v%06u", i);
    return buf;
}

std::string user_name(std::uint32_t u) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "u%05u", u);
    return buf;
}

}  // namespace

std::vector<ItemMeta> generate_catalog(std::uint32_t n_items, std::uint32_t n_topics,
                                       std::uint64_t seed) {
    if (n_items == 0) throw std::invalid_argument("generate_catalog: n_items must be >= 1");
    if (n_topics == 0) throw std::invalid_argument("generate_catalog: n_topics must be >= 1");
    if (n_items < n_topics)
        throw std::invalid_argument("generate_catalog: n_items must be >= n_topics");

    Rng rng(mix_seed(seed, hash_str("catalog")));
    std::vector<ItemMeta> catalog(n_items);
    const std::uint32_t vocab = 40;  // per-topic keyword/tag vocabulary size
    for (std::uint32_t i = 0; i < n_items; ++i) {
        ItemMeta& m = catalog[i];
        m.item_id = item_name(i);
        // First n_topics items seed one per topic so every topic is nonempty;
        // the rest draw uniformly.
        m.topic = i < n_topics ? i : static_cast<std::uint32_t>(rng.below(n_topics));
        char buf[32];
        std::snprintf(buf, sizeof(buf), "kw%u_%u", m.topic,
                      static_cast<std::uint32_t>(rng.below(vocab)));
        m.keyword = buf;
        std::snprintf(buf, sizeof(buf), "tag%u_%u", m.topic,
                      static_cast<std::uint32_t>(rng.below(vocab / 8 + 1)));
        m.tag = buf;
        m.duration_s = 15 + static_cast<std::uint32_t>(rng.below(600));
    }
    return catalog;
}

std::vector<ScenarioProfile> default_profiles(std::uint32_t n_topics, double exclusive_fraction,
                                              std::uint32_t sessions_per_user_per_day) {
    ScenarioProfile a, b;
    a.scenario_id = "A";
    b.scenario_id = "B";
    a.exclusive_item_fraction = exclusive_fraction;
    b.exclusive_item_fraction = exclusive_fraction;
    a.sessions_per_user_per_day = sessions_per_user_per_day;
    b.sessions_per_user_per_day = sessions_per_user_per_day;
    // mirrored geometric tilts: A prefers low topic ids, B high ones
    const double r = 0.3;
    double w = 1.0;
    for (std::uint32_t t = 0; t < n_topics; ++t) {
        a.exposure_distribution.push_back(w);
        w *= r;
    }
    b.exposure_distribution.assign(a.exposure_distribution.rbegin(),
                                   a.exposure_distribution.rend());
    return {a, b};
}

std::vector<InteractionRecord> generate_interactions(const std::vector<ItemMeta>& catalog,
                                                     const std::vector<ScenarioProfile>& profiles,
                                                     std::uint32_t n_users, std::uint32_t n_days,
                                                     std::uint64_t seed) {
    if (catalog.empty()) throw std::invalid_argument("generate_interactions: empty catalog");
    if (profiles.empty()) throw std::invalid_argument("generate_interactions: no profiles");
    if (n_users == 0) throw std::invalid_argument("generate_interactions: n_users must be >= 1");

    std::uint32_t n_topics = 0;
    for (const auto& m : catalog) n_topics = std::max(n_topics, m.topic + 1);
    for (const auto& p : profiles) {
        if (p.exposure_distribution.size() < n_topics)
            throw std::invalid_argument("profile " + p.scenario_id +
                                        ": exposure_distribution shorter than topic count");
        double total = 0.0;
        for (double w : p.exposure_distribution) {
            if (w < 0.0) throw std::invalid_argument("exposure weights must be nonnegative");
            total += w;
        }
        if (total <= 0.0) throw std::invalid_argument("exposure weights must have a positive entry");
        if (p.exclusive_item_fraction < 0.0 || p.exclusive_item_fraction > 1.0)
            throw std::invalid_argument("exclusive_item_fraction must lie in [0, 1]");
        if (p.sessions_per_user_per_day == 0)
            throw std::invalid_argument("sessions_per_user_per_day must be >= 1");
    }

    const std::size_t n_items = catalog.size();
    const std::size_t n_scen = profiles.size();

    // Disjoint per-scenario exclusive sets from one shuffled catalog order.
    // exclusive_to[i] == s means item i is never exposed outside scenario s.
    std::vector<int> exclusive_to(n_items, -1);
    {
        Rng ex_rng(mix_seed(seed, hash_str("exclusive")));
        std::vector<std::uint32_t> order(n_items);
        for (std::size_t i = 0; i < n_items; ++i) order[i] = static_cast<std::uint32_t>(i);
        ex_rng.shuffle(order);
        std::size_t next = 0;
        for (std::size_t s = 0; s < n_scen; ++s) {
            auto want = static_cast<std::size_t>(profiles[s].exclusive_item_fraction *
                                                 static_cast<double>(n_items));
            for (std::size_t k = 0; k < want && next < n_items; ++k, ++next)
                exclusive_to[order[next]] = static_cast<int>(s);
        }
    }

    // Per (scenario, topic) item pools with within-topic popularity weights
    // (zipf-ish by catalog order) as cumulative sums for binary search.
    struct Pool {
        std::vector<std::uint32_t> items;
        std::vector<double> cum;
    };
    std::vector<std::vector<Pool>> pools(n_scen, std::vector<Pool>(n_topics));
    {
        std::vector<std::uint32_t> topic_rank(n_items, 0);
        std::vector<std::uint32_t> seen(n_topics, 0);
        for (std::size_t i = 0; i < n_items; ++i) topic_rank[i] = seen[catalog[i].topic]++;
        for (std::size_t s = 0; s < n_scen; ++s) {
            for (std::size_t i = 0; i < n_items; ++i) {
                if (exclusive_to[i] >= 0 && exclusive_to[i] != static_cast<int>(s)) continue;
                Pool& p = pools[s][catalog[i].topic];
                double w = 1.0 / std::pow(1.0 + topic_rank[i], 0.8);
                p.items.push_back(static_cast<std::uint32_t>(i));
                p.cum.push_back(p.cum.empty() ? w : p.cum.back() + w);
            }
        }
    }

    auto draw_from_pool = [](const Pool& p, Rng& rng) -> std::uint32_t {
        double r = rng.uniform() * p.cum.back();
        auto it = std::upper_bound(p.cum.begin(), p.cum.end(), r);
        std::size_t idx = std::min<std::size_t>(it - p.cum.begin(), p.items.size() - 1);
        return p.items[idx];
    };

    const double bounce_prob = 0.0835;  // puts ~5% of completion rates at or below 0.03

    std::vector<InteractionRecord> records;
    records.reserve(static_cast<std::size_t>(n_users) * n_days * n_scen * 12);

    for (std::uint32_t u = 0; u < n_users; ++u) {
        Rng pref_rng(mix_seed(seed, hash_str("prefs"), u));
        const std::vector<double> pref = pref_rng.dirichlet(0.3, n_topics);
        const std::string uid = user_name(u);

        std::vector<std::int64_t> cursor(n_scen, 0);  // per-scenario watch clock
        for (std::uint32_t d = 0; d < n_days; ++d) {
            const std::int64_t day_base = static_cast<std::int64_t>(d) * kSecondsPerDay;
            for (std::size_t s = 0; s < n_scen; ++s) {
                Rng rng(mix_seed(seed ^ hash_str("sessions"), u, d, (s + 1) * 7919));
                const ScenarioProfile& prof = profiles[s];
                std::vector<double> topic_w(n_topics);
                std::int64_t t = std::max<std::int64_t>(cursor[s] + 1,
                                                        day_base + rng.range(0, 20000));
                for (std::uint32_t sess = 0; sess < prof.sessions_per_user_per_day; ++sess) {
                    for (std::uint32_t k = 0; k < n_topics; ++k)
                        topic_w[k] = pref[k] * prof.exposure_distribution[k];
                    std::uint32_t topic = static_cast<std::uint32_t>(rng.categorical(topic_w));
                    // a topic can be momentarily empty if all its items are
                    // exclusive elsewhere; fall back to any nonempty topic
                    for (std::uint32_t tries = 0; pools[s][topic].items.empty() && tries < n_topics;
                         ++tries)
                        topic = (topic + 1) % n_topics;
                    if (pools[s][topic].items.empty()) continue;

                    const std::uint32_t n_watch = 4 + static_cast<std::uint32_t>(rng.below(6));
                    std::uint32_t prev_item = UINT32_MAX;
                    for (std::uint32_t w = 0; w < n_watch; ++w) {
                        if (w > 0) {
                            if (rng.uniform() < 0.15) {  // interest drift inside a session
                                std::uint32_t nt = static_cast<std::uint32_t>(rng.categorical(topic_w));
                                if (!pools[s][nt].items.empty()) topic = nt;
                            }
                            t += rng.uniform() < 0.95 ? rng.range(30, 600) : rng.range(4000, 7200);
                        }
                        std::uint32_t item = draw_from_pool(pools[s][topic], rng);
                        if (item == prev_item) item = draw_from_pool(pools[s][topic], rng);
                        prev_item = item;

                        InteractionRecord r;
                        r.user_id = uid;
                        r.item_id = catalog[item].item_id;
                        r.scenario_id = prof.scenario_id;
                        r.timestamp = t;
                        r.completion_rate = rng.uniform() < bounce_prob ? rng.beta(1.0, 30.0)
                                                                        : rng.beta(5.0, 2.0);
                        records.push_back(std::move(r));
                        t += 1;  // keeps per (user, scenario) timestamps strictly increasing
                    }
                    t += rng.range(1800, 20000);  // inter-session gap, always breaks the 3600 s rule
                }
                cursor[s] = t;
            }
        }
    }

    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.timestamp, a.user_id, a.scenario_id, a.item_id) <
               std::tie(b.timestamp, b.user_id, b.scenario_id, b.item_id);
    });
    return records;
}

std::pair<std::vector<InteractionRecord>, std::vector<InteractionRecord>> split_train_validation(
    const std::vector<InteractionRecord>& records, std::int64_t cutoff_ts) {
    std::vector<InteractionRecord> train, validation;
    for (const auto& r : records)
        (r.timestamp < cutoff_ts ? train : validation).push_back(r);
    return {std::move(train), std::move(validation)};
}

void write_catalog(std::ostream& out, const std::vector<ItemMeta>& catalog) {
    for (const auto& m : catalog)
        out << m.item_id << '\t' << m.keyword << '\t' << m.tag << '\t' << m.duration_s << '\t'
            << m.topic << '\n';
}

std::vector<ItemMeta> parse_catalog(std::istream& in) {
    std::vector<ItemMeta> catalog;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            std::size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (fields.size() != 5)
            throw ParseError("catalog parse error at line " + std::to_string(line_no) +
                             ": expected 5 fields, got " + std::to_string(fields.size()));
        ItemMeta m;
        m.item_id = fields[0];
        m.keyword = fields[1];
        m.tag = fields[2];
        auto parse_u32 = [&](const std::string& s, const char* what) {
            std::uint32_t v = 0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size())
                throw ParseError("catalog parse error at line " + std::to_string(line_no) +
                                 ": invalid " + what + " '" + s + "'");
            return v;
        };
        m.duration_s = parse_u32(fields[3], "duration_s");
        if (m.duration_s == 0)
            throw ParseError("catalog parse error at line " + std::to_string(line_no) +
                             ": duration_s must be >= 1");
        m.topic = parse_u32(fields[4], "topic");
        catalog.push_back(std::move(m));
    }
    return catalog;
}

std::vector<ItemMeta> parse_catalog_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open catalog file: " + path);
    return parse_catalog(in);
}

}  // namespace mgfn
