#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace argmine {

using TokenId = std::int32_t;

struct SpecialIds {
    TokenId begin = 0;
    TokenId pad = 1;
    TokenId separator = 2;  // also closes the sequence
    TokenId unknown = 3;
    TokenId mask = 4;
};

class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::vector<TokenId> encode(std::string_view text) const = 0;
    virtual const SpecialIds& specials() const = 0;
    virtual std::size_t vocab_size() const = 0;
    virtual std::string piece(TokenId id) const = 0;
};

// Greedy longest-match subword tokenizer. Words are split on whitespace,
// ASCII punctuation stands alone, and word-internal pieces carry a "##"
// prefix in the vocabulary. A word that cannot be covered maps to <unk>.
class SubwordTokenizer final : public Tokenizer {
public:
    static constexpr std::string_view kContinuation = "##";

    // `pieces` excludes the five special tokens, which always take ids 0-4.
    explicit SubwordTokenizer(std::vector<std::string> pieces);

    static SubwordTokenizer load(const std::filesystem::path& vocab_file);
    void save(const std::filesystem::path& vocab_file) const;

    std::vector<TokenId> encode(std::string_view text) const override;
    const SpecialIds& specials() const override { return specials_; }
    std::size_t vocab_size() const override { return pieces_.size(); }
    std::string piece(TokenId id) const override { return pieces_.at(static_cast<std::size_t>(id)); }

    // Non-special pieces in id order.
    std::vector<std::string> vocabulary() const;

private:
    void encode_word(std::string_view word, std::vector<TokenId>& out) const;

    SpecialIds specials_;
    std::vector<std::string> pieces_;
    std::unordered_map<std::string, TokenId> index_;
};

// Whitespace/punctuation pre-tokenization shared by the tokenizer and the
// vocabulary builder.
std::vector<std::string> pre_tokenize(std::string_view text);

// Sorted distinct words over `texts`, merged with `extra` pieces.
std::vector<std::string> build_vocabulary(const std::vector<std::string>& texts,
                                          const std::vector<std::string>& extra = {});

// Pieces that make both pattern presets tokenize the way the pretrained
// multilingual tokenizer does: two tokens per naive verbalizer; three for
// every elaborate verbalizer except the single-token "fordert".
std::vector<std::string> pattern_preset_pieces();

}  // namespace argmine
