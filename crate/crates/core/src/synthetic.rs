//! Synthetic topic-model collection with built-in vocabulary mismatch, for
//! end-to-end experiments without licensed test collections.
//!
//! Each topic owns a block of words split into facets. A document draws
//! most of its topic words from one facet, so two relevant documents often
//! share few surface terms. Every topic also leans on a handful of
//! ambiguous words that a partner topic uses heavily. Queries combine facet
//! words with one ambiguous word; embeddings place words near their topic
//! centroid, so semantic matching can recover what exact matching misses.

use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{Document, RawRecord};
use crate::embeddings::{EmbeddingTable, OovPolicy};
use crate::error::{Error, Result};
use crate::evaluation::Qrels;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub docs: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub background_words: usize,
    pub facets: usize,
    pub ambiguous_per_topic: usize,
    pub queries: usize,
    pub query_facet_terms: usize,
    pub min_doc_len: usize,
    pub max_doc_len: usize,
    /// Share of a document's tokens drawn from its topic.
    pub topic_share: f64,
    /// Share of topic tokens drawn from the document's own facet.
    pub facet_share: f64,
    /// Share of topic tokens that are the partner topic's ambiguous words.
    pub ambiguous_share: f64,
    pub dim: usize,
    /// Standard deviation of per-word noise around the topic centroid,
    /// relative to the centroid norm.
    pub embedding_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            docs: 2000,
            topics: 20,
            words_per_topic: 200,
            background_words: 1000,
            facets: 4,
            ambiguous_per_topic: 5,
            queries: 50,
            query_facet_terms: 2,
            min_doc_len: 80,
            max_doc_len: 160,
            topic_share: 0.3,
            facet_share: 0.8,
            ambiguous_share: 0.2,
            dim: 50,
            embedding_noise: 2.5,
            seed: 2018,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCollection {
    pub documents: Vec<RawRecord>,
    pub queries: Vec<RawRecord>,
    pub qrels: Qrels,
    pub embeddings: EmbeddingTable,
    pub doc_topics: Vec<usize>,
    pub query_topics: Vec<usize>,
}

fn topic_word(topic: usize, j: usize) -> String {
    format!("t{topic:02}w{j:03}")
}

fn background_word(j: usize) -> String {
    format!("bg{j:04}")
}

fn zipf(n: usize, exponent: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((0..n).map(|r| 1.0 / ((r + 1) as f64).powf(exponent))).expect("positive weights")
}

fn gaussian<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.topics >= 2
            && self.docs >= self.topics
            && self.facets >= 1
            && self.words_per_topic >= self.facets * (self.query_facet_terms + 1) + self.ambiguous_per_topic
            && self.ambiguous_per_topic >= 1
            && self.background_words >= 1
            && self.queries >= 1
            && self.min_doc_len >= 1
            && self.min_doc_len <= self.max_doc_len
            && self.dim >= 2
            && [self.topic_share, self.facet_share, self.ambiguous_share]
                .iter()
                .all(|s| (0.0..=1.0).contains(s));
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter("inconsistent synthetic collection settings".into()))
        }
    }

    fn partner(&self, topic: usize) -> usize {
        (topic + 1) % self.topics
    }

    /// Word indices of one facet; ambiguous words belong to no facet.
    fn facet_words(&self, facet: usize) -> Vec<usize> {
        (self.ambiguous_per_topic..self.words_per_topic)
            .filter(|j| (j - self.ambiguous_per_topic) % self.facets == facet)
            .collect()
    }

    pub fn generate(&self) -> Result<SyntheticCollection> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        let facet_words: Vec<Vec<usize>> = (0..self.facets).map(|f| self.facet_words(f)).collect();
        let facet_len = facet_words.iter().map(Vec::len).min().unwrap_or(0);
        let facet_dist = zipf(facet_len, 0.8);
        let topic_dist = zipf(self.words_per_topic - self.ambiguous_per_topic, 0.6);
        let ambiguous_dist = zipf(self.ambiguous_per_topic, 0.5);
        let background_dist = zipf(self.background_words, 1.0);

        let mut documents = Vec::with_capacity(self.docs);
        let mut doc_topics = Vec::with_capacity(self.docs);
        for d in 0..self.docs {
            let topic = d % self.topics;
            let facet = rng.random_range(0..self.facets);
            let len = rng.random_range(self.min_doc_len..=self.max_doc_len);
            let mut words = Vec::with_capacity(len);
            for _ in 0..len {
                let word = if rng.random_bool(self.topic_share) {
                    let u: f64 = rng.random();
                    if u < self.ambiguous_share {
                        topic_word(self.partner(topic), ambiguous_dist.sample(&mut rng))
                    } else if u < self.ambiguous_share + (1.0 - self.ambiguous_share) * self.facet_share {
                        topic_word(topic, facet_words[facet][facet_dist.sample(&mut rng)])
                    } else {
                        topic_word(topic, self.ambiguous_per_topic + topic_dist.sample(&mut rng))
                    }
                } else {
                    background_word(background_dist.sample(&mut rng))
                };
                words.push(word);
            }
            documents.push(RawRecord {
                id: format!("doc{d:05}"),
                text: words.join(" "),
            });
            doc_topics.push(topic);
        }

        let mut queries = Vec::with_capacity(self.queries);
        let mut query_topics = Vec::with_capacity(self.queries);
        for q in 0..self.queries {
            let topic = q % self.topics;
            let facet = rng.random_range(0..self.facets);
            let mut terms = vec![topic_word(topic, rng.random_range(0..self.ambiguous_per_topic))];
            // the most frequent words of one facet
            let mut picks: Vec<usize> = Vec::new();
            while picks.len() < self.query_facet_terms {
                let j = facet_dist.sample(&mut rng);
                if !picks.contains(&j) {
                    picks.push(j);
                }
            }
            terms.extend(picks.into_iter().map(|j| topic_word(topic, facet_words[facet][j])));
            queries.push(RawRecord {
                id: format!("q{:03}", q + 1),
                text: terms.join(" "),
            });
            query_topics.push(topic);
        }

        let mut qrels = Qrels::new();
        for (query, &qt) in queries.iter().zip(&query_topics) {
            for (doc, &dt) in documents.iter().zip(&doc_topics) {
                qrels.insert(&query.id, &doc.id, u32::from(dt == qt));
            }
        }

        let centroids: Vec<Vec<f64>> = (0..self.topics).map(|_| unit(gaussian(&mut rng, self.dim))).collect();
        let noise_scale = self.embedding_noise / (self.dim as f64).sqrt();
        let mut embeddings = EmbeddingTable::new(self.dim, OovPolicy::SkipTerm)?;
        for t in 0..self.topics {
            for j in 0..self.words_per_topic {
                let anchor: Vec<f64> = if j < self.ambiguous_per_topic {
                    // used by both this topic and the topic that borrows it
                    let borrower = (t + self.topics - 1) % self.topics;
                    centroids[t].iter().zip(&centroids[borrower]).map(|(a, b)| 0.5 * (a + b)).collect()
                } else {
                    centroids[t].clone()
                };
                let noise = gaussian(&mut rng, self.dim);
                let v: Vec<f64> = anchor.iter().zip(noise).map(|(a, n)| a + noise_scale * n).collect();
                embeddings.insert(&topic_word(t, j), &v)?;
            }
        }
        for j in 0..self.background_words {
            embeddings.insert(&background_word(j), &gaussian(&mut rng, self.dim))?;
        }

        Ok(SyntheticCollection {
            documents,
            queries,
            qrels,
            embeddings,
            doc_topics,
            query_topics,
        })
    }
}

impl SyntheticCollection {
    /// Documents are already normalized tokens; no stopword or stemming
    /// step changes them.
    pub fn parsed_documents(&self) -> Vec<Document> {
        self.documents
            .iter()
            .map(|r| Document::new(r.id.clone(), r.text.split_whitespace().map(str::to_string).collect()))
            .collect()
    }

    /// Writes `corpus.jsonl`, `queries.jsonl`, `qrels.txt` and
    /// `embeddings.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join("corpus.jsonl"), &self.documents)?;
        write_jsonl(&dir.join("queries.jsonl"), &self.queries)?;
        self.qrels.save(&dir.join("qrels.txt"))?;
        self.embeddings.save(&dir.join("embeddings.txt"))
    }
}

fn write_jsonl(path: &Path, records: &[RawRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Parameter(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{preprocess, Stopwords};

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            docs: 60,
            topics: 3,
            words_per_topic: 40,
            background_words: 50,
            queries: 6,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = small().generate().unwrap();
        let b = small().generate().unwrap();
        assert_eq!(a.documents, b.documents);
        assert_eq!(a.queries, b.queries);
    }

    #[test]
    fn tokens_survive_preprocessing() {
        let c = small().generate().unwrap();
        let stop = Stopwords::english();
        for r in c.documents.iter().take(5).chain(&c.queries) {
            let expected: Vec<String> = r.text.split_whitespace().map(str::to_string).collect();
            assert_eq!(preprocess(&r.text, &stop), expected);
        }
    }

    #[test]
    fn relevance_follows_topics() {
        let c = small().generate().unwrap();
        for (q, &t) in c.queries.iter().zip(&c.query_topics) {
            assert_eq!(c.qrels.num_relevant(&q.id), c.doc_topics.iter().filter(|&&d| d == t).count());
        }
    }

    #[test]
    fn same_topic_words_are_closer_on_average() {
        let c = SyntheticConfig::default().generate().unwrap();
        let mean = |a: usize, b: usize| {
            let mut total = 0.0;
            for i in 10..40 {
                for j in 40..70 {
                    total += c.embeddings.cosine(&topic_word(a, i), &topic_word(b, j)).unwrap();
                }
            }
            total / 900.0
        };
        let same = mean(3, 3);
        let other = mean(3, 7);
        assert!(same > other + 0.05, "{same} vs {other}");
    }
}
