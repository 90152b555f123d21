#ifndef HBGNN_TESTS_FIXTURES_HPP_
#define HBGNN_TESTS_FIXTURES_HPP_

// Deterministic synthetic MovieLens corpora, written in the exact native
// file layouts (100K: tab-separated ratings, pipe-separated metadata, five
// fold files; 1M: "::"-delimited records). Ratings carry planted user,
// item, genre and demographic structure so learning-based checks have
// signal to find, and the planted effect tables are shared between the
// 100K-style and 1M-style corpora so transfer has something to transfer.
//
// When HBGNN_ML100K_DIR / HBGNN_ML1M_DIR point at real distributions the
// tests use those instead; the fixtures exist because this environment
// cannot fetch the real data.

#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "hbgnn/data.hpp"
#include "hbgnn/rng.hpp"

namespace fixture {

inline const std::vector<std::string>& occupations() {
  static const std::vector<std::string> kOcc = {
      "administrator", "artist",     "doctor",   "educator",  "engineer",  "entertainment",
      "executive",     "healthcare", "homemaker", "lawyer",   "librarian", "marketing",
      "none",          "other",      "programmer", "retired", "salesman",  "scientist",
      "student",       "technician", "writer"};
  return kOcc;
}

struct CorpusSpec {
  std::size_t users = 943;
  std::size_t movies = 1682;
  std::size_t ratings = 100000;
  std::uint64_t seed = 7;
};

/// Effect sizes planted into every synthetic corpus, drawn once from a
/// fixed seed so the 100K-style and 1M-style corpora share them.
struct Effects {
  std::array<double, 19> genre{};
  std::array<double, 21> occupation{};
  double gender_f = 0;
  double gender_m = 0;
  double age_slope = 0;
};

inline const Effects& planted_effects() {
  static const Effects fx = [] {
    Effects e;
    hbgnn::Rng rng(0xE44EC7u);
    for (auto& g : e.genre) g = 0.35 * rng.normal();
    for (auto& o : e.occupation) o = 0.10 * rng.normal();
    e.gender_f = 0.08 * rng.normal();
    e.gender_m = 0.08 * rng.normal();
    e.age_slope = 0.004;
    return e;
  }();
  return fx;
}

namespace detail {

struct UserRow {
  int id;
  int age;
  char gender;
  std::string occupation;  // 100K: word; 1M: "0".."20"
  std::string zip;
  int occupation_pos;  // position in occupations(), the planted-effect key
  double bias;
};

struct MovieRow {
  int id;
  std::vector<int> genre_flags;  // canonical indices, ascending
  double bias;
};

struct RatingRow {
  int user;
  int movie;
  int rating;
  std::int64_t timestamp;
};

struct Corpus {
  std::vector<UserRow> users;
  std::vector<MovieRow> movies;
  std::vector<RatingRow> ratings;
};

inline Corpus generate(const CorpusSpec& spec, bool ml1m_style) {
  static const int kAgeCodes[] = {1, 18, 25, 35, 45, 50, 56};
  const Effects& fx = planted_effects();
  hbgnn::Rng rng(spec.seed);
  Corpus c;

  c.users.reserve(spec.users);
  for (std::size_t i = 0; i < spec.users; ++i) {
    UserRow u;
    u.id = int(i) + 1;
    u.age = ml1m_style ? kAgeCodes[rng.below(7)] : 18 + int(rng.below(52));
    u.gender = rng.uniform() < 0.45 ? 'F' : 'M';
    u.occupation_pos = int(rng.below(occupations().size()));
    u.occupation = ml1m_style ? std::to_string(u.occupation_pos) : occupations()[u.occupation_pos];
    u.zip = std::to_string(10000 + rng.below(90000));
    u.bias = 0.6 * rng.normal();
    c.users.push_back(std::move(u));
  }

  c.movies.reserve(spec.movies);
  for (std::size_t i = 0; i < spec.movies; ++i) {
    MovieRow m;
    m.id = int(i) + 1;
    if (!ml1m_style && rng.uniform() < 0.003) {
      m.genre_flags = {0};  // the odd all-zero-flags movie: only "unknown"
    } else {
      const std::size_t k = 1 + rng.below(3);
      std::set<int> flags;
      while (flags.size() < k) flags.insert(1 + int(rng.below(18)));
      m.genre_flags.assign(flags.begin(), flags.end());
    }
    m.bias = 0.6 * rng.normal();
    c.movies.push_back(std::move(m));
  }

  const std::int64_t ts_base = ml1m_style ? 965000000 : 874000000;
  std::unordered_set<std::int64_t> seen;
  auto add_rating = [&](int user_id, int movie_id) {
    const std::int64_t key = std::int64_t(user_id) * 1000000 + movie_id;
    if (!seen.insert(key).second) return false;
    const UserRow& u = c.users[user_id - 1];
    const MovieRow& m = c.movies[movie_id - 1];
    double genre_effect = 0;
    for (int g : m.genre_flags) genre_effect += fx.genre[g];
    genre_effect /= double(m.genre_flags.size());
    double score = 3.55 + u.bias + m.bias + genre_effect + fx.occupation[u.occupation_pos] +
                   (u.gender == 'F' ? fx.gender_f : fx.gender_m) +
                   fx.age_slope * (double(u.age) - 35.0) + 0.6 * rng.normal();
    int rating = int(std::lround(score));
    rating = rating < 1 ? 1 : (rating > 5 ? 5 : rating);
    c.ratings.push_back({user_id, movie_id, rating, ts_base + std::int64_t(rng.below(20000000))});
    return true;
  };

  // Cover every movie and user once, then fill randomly.
  for (std::size_t m = 1; m <= spec.movies && c.ratings.size() < spec.ratings; ++m) {
    add_rating(1 + int(rng.below(spec.users)), int(m));
  }
  for (std::size_t u = 1; u <= spec.users && c.ratings.size() < spec.ratings; ++u) {
    add_rating(int(u), 1 + int(rng.below(spec.movies)));
  }
  while (c.ratings.size() < spec.ratings) {
    add_rating(1 + int(rng.below(spec.users)), 1 + int(rng.below(spec.movies)));
  }
  return c;
}

inline std::ofstream open(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("fixture: cannot write " + p.string());
  return out;
}

}  // namespace detail

/// Write a complete MovieLens-100K-layout distribution, fold files included.
inline void write_ml100k(const std::filesystem::path& dir, const CorpusSpec& spec = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  detail::Corpus c = detail::generate(spec, /*ml1m_style=*/false);
  const auto& canon = hbgnn::canonical_genres();

  {
    auto out = detail::open(dir / "u.user");
    for (const auto& u : c.users) {
      out << u.id << '|' << u.age << '|' << u.gender << '|' << u.occupation << '|' << u.zip << '\n';
    }
  }
  {
    auto out = detail::open(dir / "u.item");
    for (const auto& m : c.movies) {
      out << m.id << "|Movie " << m.id << " (1995)|01-Jan-1995||http://example.invalid/" << m.id;
      for (std::size_t g = 0; g < canon.size(); ++g) {
        const bool flag = std::find(m.genre_flags.begin(), m.genre_flags.end(), int(g)) !=
                          m.genre_flags.end();
        out << '|' << (flag ? 1 : 0);
      }
      out << '\n';
    }
  }
  {
    auto out = detail::open(dir / "u.occupation");
    for (const auto& o : occupations()) out << o << '\n';
  }
  {
    auto out = detail::open(dir / "u.genre");
    for (std::size_t g = 0; g < canon.size(); ++g) out << canon[g] << '|' << g << '\n';
  }
  {
    auto out = detail::open(dir / "u.data");
    for (const auto& r : c.ratings) {
      out << r.user << '\t' << r.movie << '\t' << r.rating << '\t' << r.timestamp << '\n';
    }
  }

  // Predefined 5-fold partition: a seeded shuffle split into equal fifths.
  std::vector<std::size_t> order(c.ratings.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  hbgnn::Rng fold_rng(spec.seed ^ 0x5F01D5EEDULL);
  fold_rng.shuffle(order);
  const std::size_t per_fold = c.ratings.size() / 5;
  for (int fold = 1; fold <= 5; ++fold) {
    std::vector<bool> in_test(c.ratings.size(), false);
    for (std::size_t i = std::size_t(fold - 1) * per_fold; i < std::size_t(fold) * per_fold; ++i) {
      in_test[order[i]] = true;
    }
    auto base = detail::open(dir / ("u" + std::to_string(fold) + ".base"));
    auto test = detail::open(dir / ("u" + std::to_string(fold) + ".test"));
    for (std::size_t i = 0; i < c.ratings.size(); ++i) {
      const auto& r = c.ratings[i];
      (in_test[i] ? test : base)
          << r.user << '\t' << r.movie << '\t' << r.rating << '\t' << r.timestamp << '\n';
    }
  }
}

/// Write a MovieLens-1M-layout distribution.
inline void write_ml1m(const std::filesystem::path& dir, const CorpusSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  detail::Corpus c = detail::generate(spec, /*ml1m_style=*/true);
  const auto& canon = hbgnn::canonical_genres();

  {
    auto out = detail::open(dir / "users.dat");
    for (const auto& u : c.users) {
      out << u.id << "::" << u.gender << "::" << u.age << "::" << u.occupation << "::" << u.zip
          << '\n';
    }
  }
  {
    auto out = detail::open(dir / "movies.dat");
    for (const auto& m : c.movies) {
      out << m.id << "::Movie " << m.id << " (2000)::";
      for (std::size_t i = 0; i < m.genre_flags.size(); ++i) {
        out << (i ? "|" : "") << canon[m.genre_flags[i]];
      }
      out << '\n';
    }
  }
  {
    auto out = detail::open(dir / "ratings.dat");
    for (const auto& r : c.ratings) {
      out << r.user << "::" << r.movie << "::" << r.rating << "::" << r.timestamp << '\n';
    }
  }
}

/// Unique scratch directory, removed on destruction.
class ScopedDir {
 public:
  explicit ScopedDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hbgnn_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~ScopedDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Small 100K-layout dataset loaded through the real parser.
inline hbgnn::Dataset tiny_ml100k(const ScopedDir& dir, std::size_t users = 12,
                                  std::size_t movies = 9, std::size_t ratings = 60,
                                  std::uint64_t seed = 11) {
  CorpusSpec spec;
  spec.users = users;
  spec.movies = movies;
  spec.ratings = ratings;
  spec.seed = seed;
  write_ml100k(dir.path(), spec);
  return hbgnn::load_ml100k(dir.path());
}

/// Real-data escape hatch: directory from the environment, empty if unset.
inline std::string env_dir(const char* name) {
  const char* v = std::getenv(name);
  return v == nullptr ? std::string() : std::string(v);
}

}  // namespace fixture

#endif  // HBGNN_TESTS_FIXTURES_HPP_
