#ifndef HBGNN_DATA_HPP_
#define HBGNN_DATA_HPP_

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hbgnn/error.hpp"
#include "hbgnn/rng.hpp"

namespace hbgnn {

/// Dense token -> index map for one categorical feature. Indices are
/// assigned over the sorted token list, so two builds from the same data
/// agree exactly. The genre vocabulary instead uses the fixed canonical
/// order shared by both datasets.
class Vocabulary {
 public:
  Vocabulary() = default;

  Vocabulary(std::string feature, std::vector<std::string> ordered_tokens)
      : feature_(std::move(feature)), tokens_(std::move(ordered_tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
    if (index_.size() != tokens_.size()) {
      throw ConstructionError("vocabulary '" + feature_ + "': duplicate token");
    }
  }

  static Vocabulary sorted(std::string feature, const std::set<std::string>& tokens) {
    return Vocabulary(std::move(feature), {tokens.begin(), tokens.end()});
  }

  const std::string& feature() const { return feature_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  std::size_t index_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) {
      throw VocabularyError("vocabulary '" + feature_ + "': unknown token '" + token + "'");
    }
    return it->second;
  }

  const std::string& token_of(std::size_t index) const {
    if (index >= tokens_.size()) {
      throw VocabularyError("vocabulary '" + feature_ + "': index " + std::to_string(index) +
                            " out of range");
    }
    return tokens_[index];
  }

  bool operator==(const Vocabulary& other) const {
    return feature_ == other.feature_ && tokens_ == other.tokens_;
  }

 private:
  std::string feature_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// The 19 MovieLens 100K genres, in distribution order. ML-1M's 18 named
/// genres map onto the same list, which is what makes transfer possible.
inline const std::vector<std::string>& canonical_genres() {
  static const std::vector<std::string> kGenres = {
      "unknown",  "Action",    "Adventure", "Animation", "Children's", "Comedy",  "Crime",
      "Documentary", "Drama",  "Fantasy",   "Film-Noir", "Horror",     "Musical", "Mystery",
      "Romance",  "Sci-Fi",    "Thriller",  "War",       "Western"};
  return kGenres;
}

struct Vocabularies {
  Vocabulary user_id;
  Vocabulary movie_id;
  Vocabulary occupation;
  Vocabulary zip;
  Vocabulary gender;
  Vocabulary genre;

  bool operator==(const Vocabularies& o) const {
    return user_id == o.user_id && movie_id == o.movie_id && occupation == o.occupation &&
           zip == o.zip && gender == o.gender && genre == o.genre;
  }
};

/// One (user features, item features, rating) triple. Raw tokens are kept
/// alongside the resolved vocabulary indices so examples serialize back to
/// the native formats losslessly.
struct RatingExample {
  int user_id = 0;
  int movie_id = 0;
  int age = 0;
  std::string gender;
  std::string occupation;
  std::string zip;
  std::vector<std::string> genres;  // canonical names, ascending canonical index
  double rating = 0.0;
  std::int64_t timestamp = 0;

  std::size_t user_idx = 0;
  std::size_t movie_idx = 0;
  std::size_t occupation_idx = 0;
  std::size_t zip_idx = 0;
  std::size_t gender_idx = 0;
  std::vector<std::size_t> genre_idxs;  // ascending

  bool operator==(const RatingExample& o) const {
    return user_id == o.user_id && movie_id == o.movie_id && age == o.age && gender == o.gender &&
           occupation == o.occupation && zip == o.zip && genres == o.genres &&
           rating == o.rating && timestamp == o.timestamp;
  }
};

struct UserProfile {
  int id = 0;
  int age = 0;
  std::string gender;
  std::string occupation;
  std::string zip;

  bool operator==(const UserProfile&) const = default;
};

struct MovieProfile {
  int id = 0;
  std::string title;
  std::vector<std::string> genres;  // canonical names, ascending canonical index

  bool operator==(const MovieProfile&) const = default;
};

enum class Provenance { ml100k, ml1m };

/// A loaded MovieLens distribution: metadata tables, resolved examples,
/// and transductive vocabularies built over the full data.
struct Dataset {
  std::vector<UserProfile> users;
  std::vector<MovieProfile> movies;
  std::vector<RatingExample> examples;
  Vocabularies vocabs;
  Provenance kind = Provenance::ml100k;
  std::filesystem::path dir;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

namespace detail {

inline std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string> split(const std::string& line, const std::string& delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + delim.size();
  }
  return out;
}

inline std::string location(const std::filesystem::path& file, std::size_t line_no) {
  return file.filename().string() + ":" + std::to_string(line_no);
}

inline long long parse_int(const std::string& token, const std::filesystem::path& file,
                           std::size_t line_no, const char* what) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError(location(file, line_no) + ": bad " + std::string(what) + " '" + token + "'");
  }
  return v;
}

inline std::ifstream open_or_throw(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  return in;
}

/// getline that tolerates CRLF endings.
inline bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

inline std::vector<std::string> canonicalize_genres(std::vector<std::string> names) {
  const auto& canon = canonical_genres();
  std::sort(names.begin(), names.end(), [&](const std::string& a, const std::string& b) {
    auto pos = [&](const std::string& g) {
      return std::size_t(std::find(canon.begin(), canon.end(), g) - canon.begin());
    };
    return pos(a) < pos(b);
  });
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

struct RatingRecord {
  int user_id = 0;
  int movie_id = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;
};

inline RatingRecord parse_rating_fields(const std::vector<std::string>& f,
                                        const std::filesystem::path& file, std::size_t line_no) {
  RatingRecord r;
  r.user_id = int(parse_int(f[0], file, line_no, "user id"));
  r.movie_id = int(parse_int(f[1], file, line_no, "movie id"));
  const long long rating = parse_int(f[2], file, line_no, "rating");
  if (rating < 1 || rating > 5) {
    throw ParseError(location(file, line_no) + ": rating " + std::to_string(rating) +
                     " outside 1..5");
  }
  r.rating = double(rating);
  r.timestamp = parse_int(f[3], file, line_no, "timestamp");
  return r;
}

}  // namespace detail

/// One vocabulary per categorical feature, over the FULL metadata tables
/// (train plus test), so evaluation never sees an out-of-vocabulary token.
/// Ages use the fixed 100-slot table instead of a vocabulary.
inline Vocabularies build_vocabs(const std::vector<UserProfile>& users,
                                 const std::vector<MovieProfile>& movies) {
  std::set<std::string> user_ids, movie_ids, occupations, zips, genders;
  for (const auto& u : users) {
    user_ids.insert(std::to_string(u.id));
    occupations.insert(u.occupation);
    zips.insert(u.zip);
    genders.insert(u.gender);
  }
  for (const auto& m : movies) movie_ids.insert(std::to_string(m.id));
  Vocabularies v;
  v.user_id = Vocabulary::sorted("user_id", user_ids);
  v.movie_id = Vocabulary::sorted("movie_id", movie_ids);
  v.occupation = Vocabulary::sorted("occupation", occupations);
  v.zip = Vocabulary::sorted("zip", zips);
  v.gender = Vocabulary::sorted("gender", genders);
  v.genre = Vocabulary("genre", canonical_genres());
  return v;
}

inline Vocabularies build_vocabs(const Dataset& ds) { return build_vocabs(ds.users, ds.movies); }

namespace detail {

inline void resolve_examples(std::vector<RatingExample>& examples, const Vocabularies& v) {
  for (auto& ex : examples) {
    ex.user_idx = v.user_id.index_of(std::to_string(ex.user_id));
    ex.movie_idx = v.movie_id.index_of(std::to_string(ex.movie_id));
    ex.occupation_idx = v.occupation.index_of(ex.occupation);
    ex.zip_idx = v.zip.index_of(ex.zip);
    ex.gender_idx = v.gender.index_of(ex.gender);
    ex.genre_idxs.clear();
    for (const auto& g : ex.genres) ex.genre_idxs.push_back(v.genre.index_of(g));
    std::sort(ex.genre_idxs.begin(), ex.genre_idxs.end());
  }
}

inline Dataset assemble(std::vector<UserProfile> users, std::vector<MovieProfile> movies,
                        std::vector<RatingRecord> ratings, Provenance kind,
                        std::filesystem::path dir, const std::filesystem::path& ratings_file) {
  std::unordered_map<int, const UserProfile*> user_by_id;
  std::unordered_map<int, const MovieProfile*> movie_by_id;
  for (const auto& u : users) user_by_id.emplace(u.id, &u);
  for (const auto& m : movies) movie_by_id.emplace(m.id, &m);

  Dataset ds;
  ds.users = users;
  ds.movies = movies;
  ds.kind = kind;
  ds.dir = std::move(dir);
  ds.vocabs = build_vocabs(users, movies);
  ds.examples.reserve(ratings.size());
  std::size_t line_no = 0;
  for (const auto& r : ratings) {
    ++line_no;
    auto uit = user_by_id.find(r.user_id);
    auto mit = movie_by_id.find(r.movie_id);
    if (uit == user_by_id.end()) {
      throw ParseError(detail::location(ratings_file, line_no) + ": user " +
                       std::to_string(r.user_id) + " missing from the user file");
    }
    if (mit == movie_by_id.end()) {
      throw ParseError(detail::location(ratings_file, line_no) + ": movie " +
                       std::to_string(r.movie_id) + " missing from the item file");
    }
    RatingExample ex;
    ex.user_id = r.user_id;
    ex.movie_id = r.movie_id;
    ex.age = uit->second->age;
    ex.gender = uit->second->gender;
    ex.occupation = uit->second->occupation;
    ex.zip = uit->second->zip;
    ex.genres = mit->second->genres;
    ex.rating = r.rating;
    ex.timestamp = r.timestamp;
    ds.examples.push_back(std::move(ex));
  }
  detail::resolve_examples(ds.examples, ds.vocabs);
  return ds;
}

}  // namespace detail

/// Load the MovieLens 100K distribution from its native layout:
/// tab-separated ratings in u.data, pipe-separated users in u.user and
/// movies in u.item with 19 trailing binary genre flags.
inline Dataset load_ml100k(const std::filesystem::path& dir) {
  const auto& canon = canonical_genres();

  std::vector<UserProfile> users;
  {
    auto in = detail::open_or_throw(dir / "u.user");
    std::string line;
    std::size_t line_no = 0;
    while (detail::next_line(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto f = detail::split(line, '|');
      if (f.size() != 5) {
        throw ParseError(detail::location(dir / "u.user", line_no) + ": expected 5 fields, got " +
                         std::to_string(f.size()));
      }
      UserProfile u;
      u.id = int(detail::parse_int(f[0], dir / "u.user", line_no, "user id"));
      u.age = int(detail::parse_int(f[1], dir / "u.user", line_no, "age"));
      u.gender = f[2];
      u.occupation = f[3];
      u.zip = f[4];
      users.push_back(std::move(u));
    }
  }

  std::vector<MovieProfile> movies;
  {
    auto in = detail::open_or_throw(dir / "u.item");
    std::string line;
    std::size_t line_no = 0;
    while (detail::next_line(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto f = detail::split(line, '|');
      if (f.size() != 5 + canon.size()) {
        throw ParseError(detail::location(dir / "u.item", line_no) + ": expected " +
                         std::to_string(5 + canon.size()) + " fields, got " +
                         std::to_string(f.size()));
      }
      MovieProfile m;
      m.id = int(detail::parse_int(f[0], dir / "u.item", line_no, "movie id"));
      m.title = f[1];
      for (std::size_t g = 0; g < canon.size(); ++g) {
        const long long flag = detail::parse_int(f[5 + g], dir / "u.item", line_no, "genre flag");
        if (flag != 0 && flag != 1) {
          throw ParseError(detail::location(dir / "u.item", line_no) + ": genre flag must be 0/1");
        }
        if (flag == 1) m.genres.push_back(canon[g]);
      }
      // A movie with no named genre carries only the "unknown" genre.
      if (m.genres.empty()) m.genres.push_back(canon[0]);
      movies.push_back(std::move(m));
    }
  }

  std::vector<detail::RatingRecord> ratings;
  {
    auto in = detail::open_or_throw(dir / "u.data");
    std::string line;
    std::size_t line_no = 0;
    while (detail::next_line(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto f = detail::split(line, '\t');
      if (f.size() != 4) {
        throw ParseError(detail::location(dir / "u.data", line_no) +
                         ": expected 4 tab-separated fields, got " + std::to_string(f.size()));
      }
      ratings.push_back(detail::parse_rating_fields(f, dir / "u.data", line_no));
    }
  }

  return detail::assemble(std::move(users), std::move(movies), std::move(ratings),
                          Provenance::ml100k, dir, dir / "u.data");
}

/// Load the MovieLens 1M distribution: "::"-delimited ratings.dat,
/// users.dat and movies.dat. Genre names map onto the canonical 19-genre
/// vocabulary; age bracket codes are the bracket lower bounds and are used
/// directly as the age index.
inline Dataset load_ml1m(const std::filesystem::path& dir) {
  std::vector<UserProfile> users;
  {
    auto in = detail::open_or_throw(dir / "users.dat");
    std::string line;
    std::size_t line_no = 0;
    while (detail::next_line(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto f = detail::split(line, std::string("::"));
      if (f.size() != 5) {
        throw ParseError(detail::location(dir / "users.dat", line_no) +
                         ": expected 5 fields, got " + std::to_string(f.size()));
      }
      UserProfile u;
      u.id = int(detail::parse_int(f[0], dir / "users.dat", line_no, "user id"));
      u.gender = f[1];
      u.age = int(detail::parse_int(f[2], dir / "users.dat", line_no, "age code"));
      u.occupation = f[3];
      u.zip = f[4];
      users.push_back(std::move(u));
    }
  }

  std::vector<MovieProfile> movies;
  {
    auto in = detail::open_or_throw(dir / "movies.dat");
    std::string line;
    std::size_t line_no = 0;
    while (detail::next_line(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto f = detail::split(line, std::string("::"));
      if (f.size() != 3) {
        throw ParseError(detail::location(dir / "movies.dat", line_no) +
                         ": expected 3 fields, got " + std::to_string(f.size()));
      }
      MovieProfile m;
      m.id = int(detail::parse_int(f[0], dir / "movies.dat", line_no, "movie id"));
      m.title = f[1];
      const auto& canon = canonical_genres();
      for (const auto& name : detail::split(f[2], '|')) {
        if (std::find(canon.begin(), canon.end(), name) == canon.end()) {
          throw ParseError(detail::location(dir / "movies.dat", line_no) + ": unknown genre '" +
                           name + "'");
        }
        m.genres.push_back(name);
      }
      m.genres = detail::canonicalize_genres(std::move(m.genres));
      if (m.genres.empty()) m.genres.push_back(canon[0]);
      movies.push_back(std::move(m));
    }
  }

  std::vector<detail::RatingRecord> ratings;
  {
    auto in = detail::open_or_throw(dir / "ratings.dat");
    std::string line;
    std::size_t line_no = 0;
    while (detail::next_line(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto f = detail::split(line, std::string("::"));
      if (f.size() != 4) {
        throw ParseError(detail::location(dir / "ratings.dat", line_no) +
                         ": expected 4 fields, got " + std::to_string(f.size()));
      }
      ratings.push_back(detail::parse_rating_fields(f, dir / "ratings.dat", line_no));
    }
  }

  return detail::assemble(std::move(users), std::move(movies), std::move(ratings),
                          Provenance::ml1m, dir, dir / "ratings.dat");
}

/// The distribution's predefined 5-fold split, read verbatim from
/// u<fold>.base / u<fold>.test. Lines are matched to loaded examples by
/// their (user, movie) key, which the distribution keeps unique.
inline Split fold_split(const Dataset& ds, int fold) {
  if (ds.kind != Provenance::ml100k) {
    throw DomainError("fold_split: predefined folds exist only for the 100K distribution");
  }
  if (fold < 1 || fold > 5) {
    throw DomainError("fold_split: fold " + std::to_string(fold) + " outside 1..5");
  }
  std::unordered_map<std::int64_t, std::size_t> by_key;
  by_key.reserve(ds.examples.size());
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    const auto& ex = ds.examples[i];
    by_key[std::int64_t(ex.user_id) * 1000000 + ex.movie_id] = i;
  }
  auto read_indices = [&](const std::filesystem::path& file) {
    std::vector<std::size_t> out;
    auto in = detail::open_or_throw(file);
    std::string line;
    std::size_t line_no = 0;
    while (detail::next_line(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto f = detail::split(line, '\t');
      if (f.size() != 4) {
        throw ParseError(detail::location(file, line_no) + ": expected 4 fields, got " +
                         std::to_string(f.size()));
      }
      const auto rec = detail::parse_rating_fields(f, file, line_no);
      auto it = by_key.find(std::int64_t(rec.user_id) * 1000000 + rec.movie_id);
      if (it == by_key.end()) {
        throw ParseError(detail::location(file, line_no) + ": rating (" +
                         std::to_string(rec.user_id) + ", " + std::to_string(rec.movie_id) +
                         ") not present in u.data");
      }
      out.push_back(it->second);
    }
    return out;
  };
  Split s;
  s.train = read_indices(ds.dir / ("u" + std::to_string(fold) + ".base"));
  s.test = read_indices(ds.dir / ("u" + std::to_string(fold) + ".test"));
  return s;
}

/// Chronological 80-20 split: ascending timestamp, ties broken by
/// (user, movie) so repeated invocations are identical; the latest
/// ratings are held out.
inline Split temporal_split(const Dataset& ds, double train_fraction = 0.8) {
  std::vector<std::size_t> order(ds.examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ea = ds.examples[a];
    const auto& eb = ds.examples[b];
    if (ea.timestamp != eb.timestamp) return ea.timestamp < eb.timestamp;
    if (ea.user_id != eb.user_id) return ea.user_id < eb.user_id;
    return ea.movie_id < eb.movie_id;
  });
  const std::size_t n_train = std::size_t(double(order.size()) * train_fraction);
  Split s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.test.assign(order.begin() + n_train, order.end());
  return s;
}

/// Random subsample of n ratings without replacement. Metadata and
/// vocabularies are rebuilt over the entities the kept ratings reference,
/// keeping the result transductive.
inline Dataset subsample(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (n >= ds.examples.size()) return ds;
  std::vector<std::size_t> order(ds.examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  order.resize(n);
  std::sort(order.begin(), order.end());

  std::set<int> user_ids, movie_ids;
  Dataset out;
  out.kind = ds.kind;
  out.dir = ds.dir;
  out.examples.reserve(n);
  for (std::size_t i : order) {
    out.examples.push_back(ds.examples[i]);
    user_ids.insert(ds.examples[i].user_id);
    movie_ids.insert(ds.examples[i].movie_id);
  }
  for (const auto& u : ds.users) {
    if (user_ids.count(u.id)) out.users.push_back(u);
  }
  for (const auto& m : ds.movies) {
    if (movie_ids.count(m.id)) out.movies.push_back(m);
  }
  out.vocabs = build_vocabs(out.users, out.movies);
  detail::resolve_examples(out.examples, out.vocabs);
  return out;
}

/// Write a dataset back out in its native file layout. Only the files the
/// loaders read are produced; the 100K fold files belong to the
/// distribution and are not reconstructed.
inline void save_native(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  auto open_out = [](const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
  };
  const auto& canon = canonical_genres();
  if (ds.kind == Provenance::ml100k) {
    {
      auto out = open_out(dir / "u.user");
      for (const auto& u : ds.users) {
        out << u.id << '|' << u.age << '|' << u.gender << '|' << u.occupation << '|' << u.zip
            << '\n';
      }
    }
    {
      auto out = open_out(dir / "u.item");
      for (const auto& m : ds.movies) {
        out << m.id << '|' << m.title << "|01-Jan-1995||";
        for (const auto& g : canon) {
          const bool flag = std::find(m.genres.begin(), m.genres.end(), g) != m.genres.end();
          out << '|' << (flag ? 1 : 0);
        }
        out << '\n';
      }
    }
    {
      auto out = open_out(dir / "u.data");
      for (const auto& ex : ds.examples) {
        out << ex.user_id << '\t' << ex.movie_id << '\t' << int(ex.rating) << '\t' << ex.timestamp
            << '\n';
      }
    }
  } else {
    {
      auto out = open_out(dir / "users.dat");
      for (const auto& u : ds.users) {
        out << u.id << "::" << u.gender << "::" << u.age << "::" << u.occupation << "::" << u.zip
            << '\n';
      }
    }
    {
      auto out = open_out(dir / "movies.dat");
      for (const auto& m : ds.movies) {
        out << m.id << "::" << m.title << "::";
        for (std::size_t i = 0; i < m.genres.size(); ++i) out << (i ? "|" : "") << m.genres[i];
        out << '\n';
      }
    }
    {
      auto out = open_out(dir / "ratings.dat");
      for (const auto& ex : ds.examples) {
        out << ex.user_id << "::" << ex.movie_id << "::" << int(ex.rating) << "::" << ex.timestamp
            << '\n';
      }
    }
  }
}

}  // namespace hbgnn

#endif  // HBGNN_DATA_HPP_
