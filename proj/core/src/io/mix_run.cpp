#include "denmix/io/mix_run.hpp"

#include <fstream>

#include "denmix/errors.hpp"

namespace denmix::io {

namespace {

class FileRecordSource : public RecordSource {
 public:
  explicit FileRecordSource(std::vector<CorpusRecord> records)
      : records_(std::move(records)) {}
  bool next(CorpusRecord& out) override {
    if (pos_ >= records_.size()) return false;
    out = std::move(records_[pos_++]);
    return true;
  }

 private:
  std::vector<CorpusRecord> records_;
  std::size_t pos_ = 0;
};

}  // namespace

AssembleStats mix_corpus_to_file(const PipelineConfig& config,
                                 const std::string& corpus_path,
                                 const std::string& out_path,
                                 const MixRunOptions& options) {
  FileRecordSource source(read_corpus_file(corpus_path));
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error("cannot open " + out_path + " for writing");
  ExampleWriter writer(out, options.format);

  AssembleOptions aopts;
  aopts.limit = options.limit;
  aopts.workers = options.workers == 0 ? 1 : options.workers;

  AssembleStats stats =
      assemble(config.mixture, config.vocab, source, aopts, [&](Example&& ex) {
        writer.write(to_record(ex, config.mixture));
      });
  out.flush();
  if (!out) throw Error("write failed on " + out_path);
  return stats;
}

}  // namespace denmix::io
