//! Terminal typing loop over [`TypingSession`]. Before each word the top-5
//! next-word list is shown; while typing, the best completion appears as
//! dimmed ghost text and Tab inserts it.

use std::io::{self, Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use crossterm::event::{self, Event, KeyCode, KeyEvent, KeyEventKind, KeyModifiers};
use crossterm::style::{Attribute, Print, SetAttribute};
use crossterm::terminal::{self, ClearType};
use crossterm::{cursor, queue};
use serde::Serialize;

use predtext::complete::{CompletionMetrics, CompletionTally, Key, Lexicon, TypingSession};
use predtext::corpus::KbTuple;
use predtext::lm::load_model;

use crate::RunConfig;

#[derive(Serialize)]
struct Summary {
    text: String,
    tally: CompletionTally,
    metrics: CompletionMetrics,
}

fn summary(session: &TypingSession) -> Summary {
    Summary { text: session.words().join(" "), tally: session.tally(), metrics: session.metrics() }
}

/// Maps a script character to a key; `None` ends the input.
pub fn script_key(ch: char) -> Option<Key> {
    match ch {
        '\n' | '\r' => None,
        '\t' => Some(Key::Accept),
        ' ' => Some(Key::Space),
        c => Some(Key::Char(c)),
    }
}

/// Replays `script` through a session and returns the final summary as JSON.
pub fn run_script(session: &mut TypingSession, script: &str) -> Result<String> {
    for ch in script.chars() {
        match script_key(ch) {
            Some(key) => session.press(key)?,
            None => break,
        }
    }
    session.finish()?;
    Ok(serde_json::to_string_pretty(&summary(session))?)
}

pub fn run(config: &RunConfig, model: &Path, kb: Option<&Path>, script: bool) -> Result<()> {
    let model = load_model(model).with_context(|| format!("loading {}", model.display()))?;
    let kb: Vec<KbTuple> = match kb {
        Some(p) => serde_json::from_slice(&std::fs::read(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => Vec::new(),
    };
    let lexicon = Lexicon::new(&model.vocab);
    let mut session = TypingSession::new(&model, &lexicon, &kb, config.eval.ablation, config.eval.completion())?;
    if script {
        let mut input = String::new();
        io::stdin().read_to_string(&mut input)?;
        println!("{}", run_script(&mut session, &input)?);
        return Ok(());
    }
    terminal::enable_raw_mode()?;
    let result = terminal_loop(&mut session);
    terminal::disable_raw_mode()?;
    result?;
    println!("{}", serde_json::to_string_pretty(&summary(&session))?);
    Ok(())
}

fn draw(out: &mut impl Write, session: &TypingSession, first: bool) -> io::Result<()> {
    if !first {
        queue!(out, cursor::MoveUp(2))?;
    }
    queue!(out, cursor::MoveToColumn(0), terminal::Clear(ClearType::FromCursorDown))?;
    let next: Vec<String> = if session.prefix().is_empty() {
        session.predictions(5).into_iter().map(|(w, p)| format!("{w} ({:.1}%)", 100.0 * p)).collect()
    } else {
        Vec::new()
    };
    let m = session.metrics();
    let ud = m.ud.map_or_else(|| "n/a".to_owned(), |u| format!("{u:.2}"));
    queue!(
        out,
        Print(format!("next: {}\r\n", next.join("  "))),
        Print(format!("KS {:.1}%  UD {ud}  (tab accepts, enter ends)\r\n", 100.0 * m.ks)),
        Print(format!("> {}", session.words().join(" "))),
        Print(if session.words().is_empty() { "" } else { " " }),
        Print(session.prefix()),
        SetAttribute(Attribute::Dim),
        Print(session.ghost().unwrap_or("")),
        SetAttribute(Attribute::Reset),
    )?;
    out.flush()
}

fn terminal_loop(session: &mut TypingSession) -> Result<()> {
    let mut out = io::stdout();
    draw(&mut out, session, true)?;
    loop {
        let Event::Key(KeyEvent { code, modifiers, kind: KeyEventKind::Press, .. }) = event::read()? else { continue };
        let key = match code {
            KeyCode::Char('c') if modifiers.contains(KeyModifiers::CONTROL) => break,
            KeyCode::Esc | KeyCode::Enter => break,
            KeyCode::Tab => Key::Accept,
            KeyCode::Char(' ') => Key::Space,
            KeyCode::Char(c) => Key::Char(c),
            _ => continue,
        };
        session.press(key)?;
        draw(&mut out, session, false)?;
    }
    session.finish()?;
    queue!(out, Print("\r\n"))?;
    out.flush()?;
    Ok(())
}
