#include "fsdyn/words.hpp"

#include <algorithm>
#include <limits>

#include "fsdyn/error.hpp"
#include "fsdyn/rng.hpp"

namespace fsdyn {

Word::Word(std::size_t alphabet) : m_(alphabet) {
  if (alphabet == 0) throw DataError("alphabet size must be positive");
}

Word::Word(std::size_t alphabet, std::vector<Letter> letters)
    : m_(alphabet), letters_(std::move(letters)) {
  if (alphabet == 0) throw DataError("alphabet size must be positive");
  for (Letter a : letters_)
    if (a >= alphabet) throw DataError("letter " + std::to_string(a) + " outside alphabet");
}

Word Word::suffix(std::size_t length) const {
  if (length > size()) throw DataError("suffix longer than word");
  Word out(m_);
  out.letters_.assign(letters_.end() - static_cast<std::ptrdiff_t>(length), letters_.end());
  return out;
}

Word Word::prefix(std::size_t length) const {
  if (length > size()) throw DataError("prefix longer than word");
  Word out(m_);
  out.letters_.assign(letters_.begin(), letters_.begin() + static_cast<std::ptrdiff_t>(length));
  return out;
}

Word Word::reversed() const {
  Word out = *this;
  std::reverse(out.letters_.begin(), out.letters_.end());
  return out;
}

void Word::push_back(Letter a) {
  if (a >= m_) throw DataError("letter outside alphabet");
  letters_.push_back(a);
}

std::string Word::str() const {
  std::string s;
  for (std::size_t i = 0; i < letters_.size(); ++i) {
    if (m_ > 10 && i) s += ',';
    s += std::to_string(letters_[i]);
  }
  return s;
}

Word operator+(const Word& a, const Word& b) {
  if (a.m_ != b.m_) throw DataError("concatenating words over different alphabets");
  Word out = a;
  out.letters_.insert(out.letters_.end(), b.letters_.begin(), b.letters_.end());
  return out;
}

std::uint64_t word_count(std::size_t m, std::size_t n) {
  std::uint64_t c = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (c > std::numeric_limits<std::uint64_t>::max() / m)
      return std::numeric_limits<std::uint64_t>::max();
    c *= m;
  }
  return c;
}

std::vector<Word> enumerate_words(std::size_t m, std::size_t n, std::uint64_t budget) {
  if (m == 0 || n == 0) throw DataError("enumerate_words needs m >= 1 and n >= 1");
  std::uint64_t count = word_count(m, n);
  if (count > budget)
    throw BudgetError(std::to_string(m) + "^" + std::to_string(n) +
                      " words exceed the exhaustive budget of " + std::to_string(budget) +
                      "; use montecarlo");
  std::vector<Word> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) out.push_back(word_from_index(m, n, i));
  return out;
}

Word sample_word(std::size_t m, std::size_t n, std::uint64_t seed, std::uint64_t index) {
  std::vector<Letter> letters(n);
  for (std::size_t j = 0; j < n; ++j)
    letters[j] = static_cast<Letter>(to_range(counter_draw(seed, index, n - 1 - j), m));
  return Word(m, std::move(letters));
}

std::vector<Word> sample_words(std::size_t m, std::size_t n, std::size_t count,
                               std::uint64_t seed) {
  if (count == 0) throw DataError("sample count must be positive");
  std::vector<Word> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_word(m, n, seed, i));
  return out;
}

std::vector<Word> evaluation_suffixes(const Word& w) {
  if (w.empty()) throw DataError("evaluation_suffixes of the empty word");
  std::vector<Word> out;
  out.reserve(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) out.push_back(w.suffix(k));
  return out;
}

std::uint64_t word_index(const Word& w) {
  std::uint64_t idx = 0;
  for (Letter a : w.letters()) idx = idx * w.alphabet_size() + a;
  return idx;
}

Word word_from_index(std::size_t m, std::size_t n, std::uint64_t index) {
  if (index >= word_count(m, n)) throw DataError("word index out of range");
  std::vector<Letter> letters(n);
  for (std::size_t j = n; j-- > 0;) {
    letters[j] = static_cast<Letter>(index % m);
    index /= m;
  }
  return Word(m, std::move(letters));
}

std::uint64_t strategy_word_count(const WordStrategy& s, std::size_t m, std::size_t n) {
  if (s.mode == WordStrategy::Mode::montecarlo) {
    if (s.sample_count == 0) throw DataError("montecarlo needs a positive sample count");
    return s.sample_count;
  }
  std::uint64_t c = word_count(m, n);
  if (c > s.budget)
    throw BudgetError(std::to_string(m) + "^" + std::to_string(n) +
                      " words exceed the exhaustive budget of " + std::to_string(s.budget) +
                      "; use montecarlo");
  return c;
}

Word strategy_word(const WordStrategy& s, std::size_t m, std::size_t n, std::uint64_t i) {
  if (s.mode == WordStrategy::Mode::montecarlo) return sample_word(m, n, s.seed, i);
  return word_from_index(m, n, i);
}

}  // namespace fsdyn
