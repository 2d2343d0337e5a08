#include "mrhar/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "mrhar/errors.hpp"

namespace mrhar {

Vocabulary::Vocabulary() {
    for (const char* s : {"<pad>", "<sos>", "<eos>", "<unk>"}) push(s);
}

void Vocabulary::push(const std::string& tok) {
    ids_[tok] = static_cast<int>(tokens_.size());
    tokens_.push_back(tok);
}

Vocabulary Vocabulary::build(const std::vector<SensorEvent>& train_events) {
    if (train_events.empty()) throw DataError("vocabulary: empty training event set");
    std::set<std::string> seen;
    for (const auto& e : train_events) seen.insert(e.token());
    Vocabulary v;
    for (const auto& tok : seen) v.push(tok); // std::set is already lexicographic
    return v;
}

int Vocabulary::id_or_unk(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? UNK : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size())
        throw DataError("vocabulary: id " + std::to_string(id) + " out of range (size " +
                        std::to_string(size()) + ")");
    return tokens_[id];
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("vocabulary: cannot open '" + path + "' for writing");
    for (int i = 0; i < size(); ++i) out << tokens_[i] << "\t" << i << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("vocabulary: cannot open '" + path + "'");
    Vocabulary v;
    std::string tok;
    int id;
    while (in >> tok >> id) {
        if (id < 4) continue; // specials are fixed by construction
        if (id != v.size())
            throw DataError("vocabulary: non-contiguous id " + std::to_string(id) + " in '" +
                            path + "'");
        v.push(tok);
    }
    return v;
}

} // namespace mrhar
