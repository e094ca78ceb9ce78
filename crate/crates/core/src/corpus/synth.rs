//! Deterministic synthetic corpus for tests and CI.
//!
//! Each class is an order-2 character Markov chain whose transition table is
//! built from a short built-in passage. The Irish and Scottish chains draw
//! 40% of every transition from a shared Gaelic table, which reproduces the
//! entanglement between those two classes; Welsh and English share nothing.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{preprocess, LabeledCorpus, LabeledSample, Language};
use crate::seed;

const IRISH: &str = "\
tá an aimsir go breá inniu agus tá na páistí ag súgradh sa pháirc. \
chuaigh mé go dtí an siopa ar maidin agus cheannaigh mé arán agus bainne. \
níl a fhios agam cad é an t-am anois. bhí an fear ag caint leis an mbean faoin teach nua. \
is maith liom a bheith ag léamh leabhar cois na tine. \
beidh siad ag teacht abhaile anocht tar éis na hoibre. \
d'fhéach sí amach an fhuinneog agus chonaic sí an fharraige. \
tá súil agam go mbeidh tú sásta leis an obair seo. \
ní raibh aon duine sa scoil inné mar bhí sé ina lá saoire. \
rinne siad a ndícheall ach níor éirigh leo. tá an teanga á labhairt fós sna ceantair thiar. \
cuir an cupán ar an mbord le do thoil. thug an múinteoir leabhar do gach dalta sa rang.";

const SCOTTISH: &str = "\
tha an t-sìde math an-diugh agus tha a' chlann a' cluich sa phàirc. \
chaidh mi dhan bhùth anns a' mhadainn agus cheannaich mi aran agus bainne. \
chan eil fhios agam dè an uair a tha e. bha am fear a' bruidhinn ris a' bhoireannach mun taigh ùr. \
is toil leam a bhith a' leughadh leabhraichean ri taobh an teine. \
bidh iad a' tighinn dhachaigh a-nochd an dèidh na h-obrach. \
choimhead i a-mach air an uinneig agus chunnaic i a' mhuir. \
tha mi an dòchas gum bi thu toilichte leis an obair seo. \
cha robh duine san sgoil an-dè oir bha latha saor ann. \
rinn iad an dìcheall ach cha do shoirbhich leotha. tha a' chànan ga bruidhinn fhathast anns na h-eileanan. \
cuir an cupa air a' bhòrd mas e do thoil e. thug an tidsear leabhar do gach sgoilear sa chlas.";

const GAELIC_COMMON: &str = "\
agus an is air ach ar na a do le ri ann bha an fear agus an bhean. \
is e an duine mòr a bha ann agus bha an cat beag air an talamh. \
chan e ach an t-uisge agus an ceò air na beanntan. \
an robh thu ann an sin agus an do chuala tu an ceòl. \
bha na daoine ag obair air an talamh agus air an t-sliabh. \
is ann dhan bhaile mhòr a chaidh iad an dè agus an diugh.";

const WELSH: &str = "\
mae'r tywydd yn braf heddiw ac mae'r plant yn chwarae yn y parc. \
es i i'r siop yn y bore a phrynais i fara a llaeth. \
dydw i ddim yn gwybod faint o'r gloch yw hi. roedd y dyn yn siarad gyda'r fenyw am y tŷ newydd. \
rydw i'n hoffi darllen llyfrau wrth ymyl y tân. byddan nhw'n dod adref heno ar ôl gwaith. \
edrychodd hi allan drwy'r ffenestr a gwelodd hi'r môr. \
gobeithio y byddwch chi'n hapus gyda'r gwaith hwn. \
doedd neb yn yr ysgol ddoe achos roedd hi'n wyliau. gwnaethon nhw eu gorau ond methon nhw. \
mae'r iaith yn cael ei siarad o hyd yn y gorllewin. rhowch y cwpan ar y bwrdd os gwelwch yn dda. \
rhoddodd yr athro lyfr i bob disgybl yn y dosbarth.";

const ENGLISH: &str = "\
the weather is fine today and the children are playing in the park. \
i went to the shop in the morning and bought bread and milk. \
i do not know what time it is now. the man was talking with the woman about the new house. \
i like reading books beside the fire. they will come home tonight after work. \
she looked out through the window and saw the sea. \
i hope that you will be happy with this work. \
nobody was in the school yesterday because it was a holiday. they did their best but they failed. \
the language is still spoken in the western areas. put the cup on the table please. \
the teacher gave a book to every pupil in the class.";

/// Share of transition mass the entangled pair draws from the common table.
const SHARED_MASS: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub per_class: usize,
    pub avg_len: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { seed: 7, per_class: 400, avg_len: 17 }
    }
}

type Dist = Vec<(char, f64)>;

/// Trigram chain with bigram and unigram backoff.
struct CharChain {
    tri: BTreeMap<(char, char), Dist>,
    bi: BTreeMap<char, Dist>,
    uni: Dist,
}

fn normalise(counts: BTreeMap<char, f64>) -> Dist {
    let total: f64 = counts.values().sum();
    counts.into_iter().map(|(c, n)| (c, n / total)).collect()
}

impl CharChain {
    fn from_text(passage: &str) -> Self {
        let text: Vec<char> = passage
            .split('.')
            .map(preprocess)
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
            .chars()
            .collect();
        let mut tri: BTreeMap<(char, char), BTreeMap<char, f64>> = BTreeMap::new();
        let mut bi: BTreeMap<char, BTreeMap<char, f64>> = BTreeMap::new();
        let mut uni: BTreeMap<char, f64> = BTreeMap::new();
        // a leading space makes word starts reachable from the boundary state
        let padded: Vec<char> = std::iter::once(' ').chain(text.iter().copied()).chain([' ']).collect();
        for w in padded.windows(3) {
            *tri.entry((w[0], w[1])).or_default().entry(w[2]).or_default() += 1.0;
        }
        for w in padded.windows(2) {
            *bi.entry(w[0]).or_default().entry(w[1]).or_default() += 1.0;
        }
        for &c in &padded {
            *uni.entry(c).or_default() += 1.0;
        }
        Self {
            tri: tri.into_iter().map(|(k, v)| (k, normalise(v))).collect(),
            bi: bi.into_iter().map(|(k, v)| (k, normalise(v))).collect(),
            uni: normalise(uni),
        }
    }

    fn next_dist(&self, a: char, b: char) -> &Dist {
        self.tri.get(&(a, b)).or_else(|| self.bi.get(&b)).unwrap_or(&self.uni)
    }
}

/// An order-2 chain optionally mixed with a shared component.
struct ClassChain {
    own: CharChain,
    shared: Option<CharChain>,
}

impl ClassChain {
    fn sample_next(&self, a: char, b: char, rng: &mut seed::Rng) -> char {
        let dist = match &self.shared {
            Some(shared) if rng.random::<f64>() < SHARED_MASS => shared.next_dist(a, b),
            _ => self.own.next_dist(a, b),
        };
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(c, p) in dist {
            acc += p;
            if u < acc {
                return c;
            }
        }
        dist.last().map(|&(c, _)| c).unwrap_or(' ')
    }

    fn sentence(&self, words: usize, rng: &mut seed::Rng) -> String {
        let mut out = String::new();
        let (mut a, mut b) = (' ', ' ');
        let mut done_words = 0;
        let mut guard = 0;
        while done_words < words && guard < 4000 {
            guard += 1;
            let c = self.sample_next(a, b, rng);
            if c == ' ' {
                if b == ' ' {
                    continue;
                }
                done_words += 1;
                if done_words == words {
                    break;
                }
            }
            out.push(c);
            a = b;
            b = c;
        }
        out.trim().to_string()
    }
}

fn chain_for(lang: Language) -> ClassChain {
    match lang {
        Language::Irish => ClassChain {
            own: CharChain::from_text(IRISH),
            shared: Some(CharChain::from_text(GAELIC_COMMON)),
        },
        Language::Scottish => ClassChain {
            own: CharChain::from_text(SCOTTISH),
            shared: Some(CharChain::from_text(GAELIC_COMMON)),
        },
        Language::Welsh => ClassChain { own: CharChain::from_text(WELSH), shared: None },
        Language::English => ClassChain { own: CharChain::from_text(ENGLISH), shared: None },
    }
}

/// Generates `per_class` sentences for each of the four classes, interleaved
/// by class. Sentence lengths are uniform in `[avg_len/2, 3*avg_len/2]`.
pub fn generate_synthetic(cfg: &SynthConfig) -> LabeledCorpus {
    let mut rng = seed::rng(cfg.seed);
    let chains: Vec<(Language, ClassChain)> =
        [Language::Irish, Language::Scottish, Language::Welsh, Language::English]
            .into_iter()
            .map(|l| (l, chain_for(l)))
            .collect();
    let lo = (cfg.avg_len / 2).max(1);
    let hi = (cfg.avg_len * 3 / 2).max(lo);
    let mut samples = Vec::with_capacity(cfg.per_class * 4);
    for i in 0..cfg.per_class {
        for (lang, chain) in &chains {
            let words = rng.random_range(lo..=hi);
            let mut text = chain.sentence(words, &mut rng);
            if text.is_empty() {
                text = lang.name().to_string();
            }
            samples.push(LabeledSample {
                text,
                label: *lang,
                source_id: format!("synth:{}:{}:{}", cfg.seed, lang.code(), i + 1),
            });
        }
    }
    LabeledCorpus::new(samples)
}
