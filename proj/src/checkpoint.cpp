#include "mrhar/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace mrhar {

namespace {
constexpr const char* kMagic = "mrhar-checkpoint v1";
}

void save_checkpoint(const std::string& path, const NamedParams& params) {
    std::ofstream out(path);
    if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    out << kMagic << "\n" << params.size() << "\n";
    out << std::setprecision(17);
    for (const auto& [name, t] : params) {
        out << name << " " << t->rank();
        for (int d : t->shape) out << " " << d;
        for (double v : t->data) out << " " << v;
        out << "\n";
    }
    if (!out) throw IoError("checkpoint: write to '" + path + "' failed");
}

std::map<std::string, TensorPtr> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
    std::string magic;
    std::getline(in, magic);
    if (magic != kMagic)
        throw DataError("checkpoint: '" + path + "' has unknown header '" + magic + "'");
    size_t count = 0;
    in >> count;
    std::map<std::string, TensorPtr> result;
    for (size_t i = 0; i < count; ++i) {
        std::string name;
        int rank = 0;
        if (!(in >> name >> rank))
            throw DataError("checkpoint: truncated at parameter " + std::to_string(i));
        Shape shape(rank);
        for (int d = 0; d < rank; ++d)
            if (!(in >> shape[d])) throw DataError("checkpoint: bad shape for '" + name + "'");
        std::vector<double> values(numel_of(shape));
        for (auto& v : values)
            if (!(in >> v)) throw DataError("checkpoint: truncated values for '" + name + "'");
        result[name] = make_tensor(shape, std::move(values));
    }
    return result;
}

void restore_params(const NamedParams& params, const std::map<std::string, TensorPtr>& loaded) {
    for (const auto& [name, t] : params) {
        auto it = loaded.find(name);
        if (it == loaded.end()) throw DataError("checkpoint: missing parameter '" + name + "'");
        if (it->second->shape != t->shape)
            throw DataError("checkpoint: parameter '" + name + "' has shape " +
                            shape_str(it->second->shape) + ", expected " + shape_str(t->shape));
        t->data = it->second->data;
    }
}

} // namespace mrhar
