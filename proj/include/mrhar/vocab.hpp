#pragma once
#include <string>
#include <unordered_map>
#include <vector>

#include "mrhar/events.hpp"

namespace mrhar {

// Bijection between event tokens ("sensor:value") and integer ids. Specials
// occupy fixed slots; event tokens are numbered after them in lexicographic
// order so the mapping is a pure function of the training token set.
class Vocabulary {
public:
    static constexpr int PAD = 0;
    static constexpr int SOS = 1;
    static constexpr int EOS = 2;
    static constexpr int UNK = 3;

    Vocabulary();
    static Vocabulary build(const std::vector<SensorEvent>& train_events);

    int size() const { return static_cast<int>(tokens_.size()); }
    // Unseen tokens map to UNK.
    int id_or_unk(const std::string& token) const;
    const std::string& token(int id) const;
    bool is_special(int id) const { return id >= 0 && id < 4; }

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
    void push(const std::string& tok);
};

} // namespace mrhar
