#include "argmine/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "argmine/errors.hpp"

namespace argmine {

namespace {

const char* const kSpecialPieces[] = {"<s>", "<pad>", "</s>", "<unk>", "<mask>"};

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }
bool is_utf8_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

}  // namespace

std::vector<std::string> pre_tokenize(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) words.push_back(std::move(cur));
        cur.clear();
    };
    for (unsigned char c : text) {
        if (is_space(c)) {
            flush();
        } else if (is_punct(c)) {
            flush();
            words.emplace_back(1, static_cast<char>(c));
        } else {
            cur.push_back(static_cast<char>(c));
        }
    }
    flush();
    return words;
}

SubwordTokenizer::SubwordTokenizer(std::vector<std::string> pieces) {
    for (const char* s : kSpecialPieces) pieces_.emplace_back(s);
    for (auto& p : pieces) {
        if (p.empty()) continue;
        if (std::find(std::begin(kSpecialPieces), std::end(kSpecialPieces), p) !=
            std::end(kSpecialPieces)) {
            continue;
        }
        pieces_.push_back(std::move(p));
    }
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        if (!index_.emplace(pieces_[i], static_cast<TokenId>(i)).second) {
            throw ConfigError("duplicate vocabulary piece '" + pieces_[i] + "'");
        }
    }
}

SubwordTokenizer SubwordTokenizer::load(const std::filesystem::path& vocab_file) {
    std::ifstream in(vocab_file);
    if (!in) throw LoadError("cannot open vocabulary '" + vocab_file.string() + "'");
    std::vector<std::string> pieces;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pieces.push_back(line);
    }
    return SubwordTokenizer(std::move(pieces));
}

void SubwordTokenizer::save(const std::filesystem::path& vocab_file) const {
    std::ofstream out(vocab_file, std::ios::binary);
    if (!out) throw LoadError("cannot write vocabulary '" + vocab_file.string() + "'");
    for (const auto& p : pieces_) out << p << '\n';
}

std::vector<std::string> SubwordTokenizer::vocabulary() const {
    return {pieces_.begin() + std::size(kSpecialPieces), pieces_.end()};
}

void SubwordTokenizer::encode_word(std::string_view word, std::vector<TokenId>& out) const {
    const std::size_t mark = out.size();
    std::size_t pos = 0;
    std::string key;
    while (pos < word.size()) {
        TokenId found = -1;
        std::size_t found_end = pos;
        for (std::size_t end = word.size(); end > pos; --end) {
            // only cut on code point boundaries
            if (end < word.size() && is_utf8_continuation(static_cast<unsigned char>(word[end]))) {
                continue;
            }
            key.assign(pos == 0 ? "" : kContinuation);
            key.append(word.substr(pos, end - pos));
            if (auto it = index_.find(key); it != index_.end()) {
                found = it->second;
                found_end = end;
                break;
            }
        }
        if (found < 0) {
            out.resize(mark);
            out.push_back(specials_.unknown);
            return;
        }
        out.push_back(found);
        pos = found_end;
    }
}

std::vector<TokenId> SubwordTokenizer::encode(std::string_view text) const {
    std::vector<TokenId> out;
    for (const auto& w : pre_tokenize(text)) encode_word(w, out);
    return out;
}

std::vector<std::string> build_vocabulary(const std::vector<std::string>& texts,
                                          const std::vector<std::string>& extra) {
    std::set<std::string> words(extra.begin(), extra.end());
    for (const auto& t : texts) {
        for (auto& w : pre_tokenize(t)) words.insert(std::move(w));
    }
    return {words.begin(), words.end()};
}

std::vector<std::string> pattern_preset_pieces() {
    return {
        // naive verbalizers
        "argument", "claim", "Satz", "für", "gegen", "ohne",
        // elaborate verbalizers; "argumentiert" and "widerspricht" split into pieces
        "##iert", "wider", "##spr", "##icht", "fordert", "ist", "neutral", "zu",
        // pattern text
        "Dies", "Dieser", "ein", "Waffenlieferungen", "an", "die", "Ukraine", ":",
        "Waffenlieferung",
    };
}

}  // namespace argmine
