#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fsdyn {

using Letter = std::uint16_t;

// A finite word w = w_1 ... w_n over {0, ..., m-1}.  The composite map is
// f_w = f_{w_1} o ... o f_{w_n}, so the last letter acts first.
class Word {
 public:
  Word() = default;
  explicit Word(std::size_t alphabet);
  Word(std::size_t alphabet, std::vector<Letter> letters);

  std::size_t alphabet_size() const { return m_; }
  std::size_t size() const { return letters_.size(); }
  bool empty() const { return letters_.empty(); }
  Letter operator[](std::size_t i) const { return letters_[i]; }
  std::span<const Letter> letters() const { return letters_; }

  // The suffix of the given length (length 0 is the empty word).
  Word suffix(std::size_t length) const;
  Word prefix(std::size_t length) const;
  Word reversed() const;
  void push_back(Letter a);

  std::string str() const;

  friend Word operator+(const Word& a, const Word& b);
  friend bool operator==(const Word& a, const Word& b) = default;

 private:
  std::size_t m_ = 1;
  std::vector<Letter> letters_;
};

struct WordStrategy {
  enum class Mode { exhaustive, montecarlo };
  Mode mode = Mode::exhaustive;
  std::size_t sample_count = 1000;
  std::uint64_t seed = 0;
  std::uint64_t budget = 1'000'000;
};

// m^n, or UINT64_MAX when it overflows.
std::uint64_t word_count(std::size_t m, std::size_t n);

// All m^n words of length n in lexicographic order.  Throws BudgetError when
// m^n exceeds the budget.
std::vector<Word> enumerate_words(std::size_t m, std::size_t n,
                                  std::uint64_t budget = 1'000'000);

// iid uniform words.  Letter j of sample i is drawn from counter n-1-j of
// stream i, so the length-k suffix of a sampled length-n word is exactly the
// length-k word sampled with the same (seed, i).
std::vector<Word> sample_words(std::size_t m, std::size_t n, std::size_t count,
                               std::uint64_t seed);
Word sample_word(std::size_t m, std::size_t n, std::uint64_t seed, std::uint64_t index);

// Suffixes of lengths 0, 1, ..., n-1, shortest first; w itself is excluded.
std::vector<Word> evaluation_suffixes(const Word& w);

std::uint64_t word_index(const Word& w);
Word word_from_index(std::size_t m, std::size_t n, std::uint64_t index);

// Number of words the strategy visits at length n; exhaustive mode checks the budget.
std::uint64_t strategy_word_count(const WordStrategy& s, std::size_t m, std::size_t n);
// The i-th word of the strategy at length n.
Word strategy_word(const WordStrategy& s, std::size_t m, std::size_t n, std::uint64_t i);

}  // namespace fsdyn
