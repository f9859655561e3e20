#ifndef HSSC_H
#define HSSC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  HSSC_STATUS_OK = 0,
  HSSC_STATUS_NULL_POINTER = 1,
  HSSC_STATUS_INVALID_UTF8 = 2,
  HSSC_STATUS_LOAD_FAILED = 3,
  HSSC_STATUS_EMPTY_INPUT = 4,
  HSSC_STATUS_BUFFER_TOO_SMALL = 5,
  HSSC_STATUS_NO_CLASSIFIER = 6,
  HSSC_STATUS_INTERNAL = 7,
} HsscStatus;

/**
 * A loaded model together with its vocabulary.
 */
typedef struct HsscModel HsscModel;

/**
 * ROUGE F1 scores in [0, 1].
 */
typedef struct {
  double rouge_1;
  double rouge_2;
  double rouge_l;
} HsscRouge;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a checkpoint directory written by `hssc train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
HsscStatus hssc_model_load(const char *path, HsscModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`hssc_model_load`] and not be used afterwards.
 */
void hssc_model_free(HsscModel *model);

/**
 * Number of rating classes, or 0 for summarization-only variants.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t hssc_model_num_classes(const HsscModel *model);

/**
 * Summarizes `review` and predicts its rating.
 *
 * `summary` receives a new string. `rating` receives the 1-based rating, or 0
 * when the model has no classifier. If `distribution` is non-null it must hold
 * `distribution_len` doubles, at least [`hssc_model_num_classes`] of them.
 *
 * # Safety
 * All non-null pointers must be valid for the described access.
 */
HsscStatus hssc_summarize(const HsscModel *model,
                          const char *review,
                          char **summary,
                          uint32_t *rating,
                          double *distribution,
                          size_t distribution_len);

/**
 * Class distribution only, for callers that do not need a summary.
 *
 * # Safety
 * `distribution` must hold `distribution_len` doubles.
 */
HsscStatus hssc_classify(const HsscModel *model,
                         const char *review,
                         double *distribution,
                         size_t distribution_len);

/**
 * ROUGE-1, ROUGE-2 and ROUGE-L F1 between two texts after tokenization.
 *
 * # Safety
 * `candidate` and `reference` must be NUL-terminated; `out` must be valid.
 */
HsscStatus hssc_rouge(const char *candidate, const char *reference, HsscRouge *out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void hssc_string_free(char *s);

/**
 * Message for the last failed call on this thread, empty after success.
 * Valid until the next call into this library on the same thread.
 */
const char *hssc_last_error_message(void);

const char *hssc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HSSC_H */
