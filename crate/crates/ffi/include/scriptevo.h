#ifndef SCRIPTEVO_H
#define SCRIPTEVO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes. Zero is success.
 */
typedef enum SevoStatus {
  SEVO_STATUS_OK = 0,
  SEVO_STATUS_NULL_POINTER = 1,
  SEVO_STATUS_INVALID_ARGUMENT = 2,
  SEVO_STATUS_IO = 3,
  SEVO_STATUS_FORMAT = 4,
  SEVO_STATUS_CONFIG = 5,
  SEVO_STATUS_TRAINING = 6,
  SEVO_STATUS_NOT_FOUND = 7,
  SEVO_STATUS_PANIC = 99,
} SevoStatus;

/*
 Parse outcome reported by [`sevo_score_response`].
 */
typedef enum SevoParseStatus {
  SEVO_PARSE_STATUS_PARSED = 0,
  SEVO_PARSE_STATUS_MULTI_CANDIDATE_FAILURE = 1,
  SEVO_PARSE_STATUS_UNPARSEABLE = 2,
} SevoParseStatus;

/*
 Opaque benchmark handle.
 */
typedef struct SevoBenchmark SevoBenchmark;

/*
 Opaque trained-model handle.
 */
typedef struct SevoBundle SevoBundle;

/*
 Opaque corpus handle. Carries the response parser built from its
 vocabulary.
 */
typedef struct SevoCorpus SevoCorpus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *sevo_last_error_message(void);

/*
 Library version as a static string.
 */
const char *sevo_version(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void sevo_string_free(char *s);

/*
 Synthesizes a corpus of `n_chars` characters, every stage present, two
 variants per stage.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum SevoStatus sevo_corpus_synth(uint64_t seed, size_t n_chars, struct SevoCorpus **out);

/*
 Loads a corpus from a manifest file or a directory holding one.
 Invalid glyphs are dropped, as on the command line.

 # Safety
 `path` must be a NUL-terminated string; `out` as for [`sevo_corpus_synth`].
 */
enum SevoStatus sevo_corpus_load(const char *path, struct SevoCorpus **out);

/*
 Writes the corpus into directory `dir`.

 # Safety
 `corpus` must be a live handle; `dir` a NUL-terminated string.
 */
enum SevoStatus sevo_corpus_save(const struct SevoCorpus *corpus, const char *dir);

/*
 Number of characters and glyphs in the corpus. Either output may be null.

 # Safety
 `corpus` must be a live handle.
 */
enum SevoStatus sevo_corpus_size(const struct SevoCorpus *corpus,
                                 size_t *out_chars,
                                 size_t *out_glyphs);

/*
 Hex SHA-256 fingerprint of the corpus; free with [`sevo_string_free`].

 # Safety
 `corpus` must be a live handle; `out` writable.
 */
enum SevoStatus sevo_corpus_fingerprint(const struct SevoCorpus *corpus, char **out);

/*
 # Safety
 `corpus` must be null or a handle not yet freed.
 */
void sevo_corpus_free(struct SevoCorpus *corpus);

/*
 Loads a benchmark JSONL file.

 # Safety
 `path` must be a NUL-terminated string; `out` writable.
 */
enum SevoStatus sevo_benchmark_load(const char *path, struct SevoBenchmark **out);

/*
 Number of instances in the benchmark.

 # Safety
 `bench` must be a live handle; `out` writable.
 */
enum SevoStatus sevo_benchmark_len(const struct SevoBenchmark *bench, size_t *out);

/*
 # Safety
 `bench` must be null or a handle not yet freed.
 */
void sevo_benchmark_free(struct SevoBenchmark *bench);

/*
 Parses and scores one raw response against an instance's key.
 `out_parse_status` may be null.

 # Safety
 Handles must be live; strings NUL-terminated; `out_score` writable.
 */
enum SevoStatus sevo_score_response(const struct SevoCorpus *corpus,
                                    const struct SevoBenchmark *bench,
                                    const char *instance_id,
                                    const char *raw_response,
                                    double *out_score,
                                    enum SevoParseStatus *out_parse_status);

/*
 Loads a trained model bundle.

 # Safety
 `path` must be a NUL-terminated string; `out` writable.
 */
enum SevoStatus sevo_bundle_load(const char *path, struct SevoBundle **out);

/*
 The bundle's response to one instance; free with [`sevo_string_free`].

 # Safety
 Handles must be live; `instance_id` NUL-terminated; `out` writable.
 */
enum SevoStatus sevo_bundle_answer(const struct SevoBundle *bundle,
                                   const struct SevoCorpus *corpus,
                                   const struct SevoBenchmark *bench,
                                   const char *instance_id,
                                   char **out);

/*
 # Safety
 `bundle` must be null or a handle not yet freed.
 */
void sevo_bundle_free(struct SevoBundle *bundle);

/*
 Multi-positive contrastive loss and its gradients.

 `positives` is `n_pos * dim` row-major. Positive `i` owns
 `neg_counts[i]` negatives, stored consecutively in `negatives`
 (`sum(neg_counts) * dim` values, positive 0's first). The gradient
 buffers have the same shapes as their inputs. `negatives`,
 `grad_negatives` and `neg_counts` may be null when there are no
 negatives (`neg_counts` null means zero for every positive).

 # Safety
 Every non-null buffer must hold the number of values stated above.
 */
enum SevoStatus sevo_contrastive_loss(const double *positives,
                                      size_t n_pos,
                                      size_t dim,
                                      const double *negatives,
                                      const size_t *neg_counts,
                                      double tau,
                                      double *out_loss,
                                      double *grad_positives,
                                      double *grad_negatives);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCRIPTEVO_H */
