use std::collections::HashMap;
use std::io::Read;
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::Value;
use tracing::{debug, warn};

use crate::frame::{self, Frame};
use crate::{MessageKind, PortAddress, PortError, PortMessage, PortName, Registry};

pub const DEFAULT_CONNECT_TIMEOUT: Duration = Duration::from_secs(5);

/// Delivery handlers taking longer than this are reported.
const HANDLER_BUDGET: Duration = Duration::from_millis(100);
const ACCEPT_POLL: Duration = Duration::from_millis(10);
const DIAL_TIMEOUT: Duration = Duration::from_secs(1);
const WRITE_TIMEOUT: Duration = Duration::from_secs(2);

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// Reconnect schedule: `initial`, then multiplied by `factor` up to `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Backoff {
    pub initial: Duration,
    pub factor: u32,
    pub cap: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            initial: Duration::from_millis(100),
            factor: 2,
            cap: Duration::from_secs(3),
        }
    }
}

impl Backoff {
    pub fn delays(self) -> impl Iterator<Item = Duration> {
        std::iter::successors(Some(self.initial.min(self.cap)), move |d| {
            Some((*d * self.factor).min(self.cap))
        })
    }
}

/// A message received on a local port, tagged with the sending port's name.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub from: String,
    pub msg: PortMessage,
}

type Handler = Arc<dyn Fn(Delivery) + Send + Sync>;

struct LocalPort {
    addr: PortAddress,
    next_seq: AtomicU64,
    publish_lock: Mutex<()>,
    links: Mutex<Vec<Arc<Link>>>,
    inbox_tx: Sender<Delivery>,
    inbox_rx: Mutex<Receiver<Delivery>>,
    handler: RwLock<Option<Handler>>,
    closed: AtomicBool,
    accepted: Mutex<Vec<TcpStream>>,
}

impl LocalPort {
    fn deliver(&self, delivery: Delivery) {
        let handler = self
            .handler
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone();
        match handler {
            Some(handler) => {
                let started = Instant::now();
                handler(delivery);
                let took = started.elapsed();
                if took > HANDLER_BUDGET {
                    warn!(port = %self.addr.name, ?took, "delivery handler exceeded its budget");
                }
            }
            None => {
                let _ = self.inbox_tx.send(delivery);
            }
        }
    }

    fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        for stream in lock(&self.accepted).drain(..) {
            let _ = stream.shutdown(Shutdown::Both);
        }
        for link in lock(&self.links).drain(..) {
            link.close();
        }
    }
}

struct Link {
    src: PortName,
    dst: PortName,
    registry: Registry,
    backoff: Backoff,
    stream: Mutex<Option<(u64, TcpStream)>>,
    generation: AtomicU64,
    reconnecting: AtomicBool,
    closed: AtomicBool,
}

impl Link {
    fn dial(&self, addr: &PortAddress) -> std::io::Result<TcpStream> {
        let sock = addr
            .socket_addr()
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, "unresolvable"))?;
        let mut stream = TcpStream::connect_timeout(&sock, DIAL_TIMEOUT)?;
        stream.set_nodelay(true)?;
        stream.set_write_timeout(Some(WRITE_TIMEOUT))?;
        frame::write_frame(
            &mut stream,
            &Frame::Hello {
                hello: self.src.to_string(),
            },
        )
        .map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(stream)
    }

    fn install(self: &Arc<Self>, stream: TcpStream) {
        let generation = self.generation.fetch_add(1, Ordering::SeqCst) + 1;
        let watcher = stream.try_clone();
        *lock(&self.stream) = Some((generation, stream));
        debug!(src = %self.src, dst = %self.dst, generation, "link up");
        if let Ok(mut watcher) = watcher {
            let link = Arc::clone(self);
            thread::spawn(move || {
                // The receiving side never writes, so any read return means
                // the peer went away.
                let mut buf = [0u8; 64];
                loop {
                    match watcher.read(&mut buf) {
                        Ok(0) | Err(_) => break,
                        Ok(_) => continue,
                    }
                }
                link.mark_down(generation);
            });
        }
    }

    fn mark_down(self: &Arc<Self>, generation: u64) {
        {
            let mut guard = lock(&self.stream);
            match guard.as_ref() {
                Some((g, _)) if *g == generation => *guard = None,
                _ => return,
            }
        }
        if !self.closed.load(Ordering::SeqCst) {
            debug!(src = %self.src, dst = %self.dst, "link down");
            self.spawn_reconnect();
        }
    }

    fn spawn_reconnect(self: &Arc<Self>) {
        if self.closed.load(Ordering::SeqCst) || self.reconnecting.swap(true, Ordering::SeqCst) {
            return;
        }
        let link = Arc::clone(self);
        thread::spawn(move || {
            for delay in link.backoff.delays() {
                if link.closed.load(Ordering::SeqCst) {
                    break;
                }
                if let Some(addr) = link.registry.lookup(link.dst.as_str()) {
                    if let Ok(stream) = link.dial(&addr) {
                        link.install(stream);
                        break;
                    }
                }
                thread::sleep(delay);
            }
            link.reconnecting.store(false, Ordering::SeqCst);
        });
    }

    fn send(self: &Arc<Self>, bytes: &[u8]) -> bool {
        use std::io::Write;
        let mut guard = lock(&self.stream);
        let failed = match guard.as_mut() {
            Some((_, stream)) => match stream.write_all(bytes) {
                Ok(()) => return true,
                Err(e) => {
                    debug!(src = %self.src, dst = %self.dst, error = %e, "write failed");
                    true
                }
            },
            None => false,
        };
        if failed {
            if let Some((_, stream)) = guard.take() {
                let _ = stream.shutdown(Shutdown::Both);
            }
        }
        drop(guard);
        self.spawn_reconnect();
        false
    }

    fn is_up(&self) -> bool {
        lock(&self.stream).is_some()
    }

    fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        if let Some((_, stream)) = lock(&self.stream).take() {
            let _ = stream.shutdown(Shutdown::Both);
        }
    }
}

/// Handle to an outgoing link created by [`Node::connect`].
#[derive(Clone)]
pub struct LinkHandle {
    link: Arc<Link>,
}

impl LinkHandle {
    pub fn src(&self) -> &str {
        self.link.src.as_str()
    }

    pub fn dst(&self) -> &str {
        self.link.dst.as_str()
    }

    pub fn is_up(&self) -> bool {
        self.link.is_up()
    }
}

impl std::fmt::Debug for LinkHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinkHandle")
            .field("src", &self.src())
            .field("dst", &self.dst())
            .field("up", &self.is_up())
            .finish()
    }
}

/// A set of local ports sharing one registry.
pub struct Node {
    registry: Registry,
    ports: Mutex<HashMap<PortName, Arc<LocalPort>>>,
    backoff: Backoff,
    connect_timeout: Duration,
}

impl Node {
    pub fn new(registry: Registry) -> Self {
        Self {
            registry,
            ports: Mutex::new(HashMap::new()),
            backoff: Backoff::default(),
            connect_timeout: DEFAULT_CONNECT_TIMEOUT,
        }
    }

    pub fn with_connect_timeout(mut self, timeout: Duration) -> Self {
        self.connect_timeout = timeout;
        self
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    fn local(&self, name: &str) -> Result<Arc<LocalPort>, PortError> {
        PortName::new(name)
            .ok()
            .and_then(|n| lock(&self.ports).get(&n).cloned())
            .ok_or_else(|| PortError::UnknownPort(name.to_string()))
    }

    /// Binds `host:tcp_port` (0 = allocate) and registers `name` there.
    pub fn register_port(&self, name: &str, host: &str, tcp_port: u16) -> Result<PortAddress, PortError> {
        let name = PortName::new(name)?;
        if self.registry.contains(&name) {
            return Err(PortError::DuplicateName(name.to_string()));
        }
        let requested = self.registry.allocate(tcp_port);
        let bind = format!("{host}:{requested}");
        let listener = TcpListener::bind(&bind).map_err(|source| PortError::BindFailure {
            name: name.to_string(),
            addr: bind.clone(),
            source,
        })?;
        let bound = listener.local_addr()?.port();
        let addr = PortAddress {
            name: name.clone(),
            host: host.to_string(),
            tcp_port: bound,
        };
        self.registry.insert(addr.clone())?;

        let (inbox_tx, inbox_rx) = mpsc::channel();
        let port = Arc::new(LocalPort {
            addr: addr.clone(),
            next_seq: AtomicU64::new(1),
            publish_lock: Mutex::new(()),
            links: Mutex::new(Vec::new()),
            inbox_tx,
            inbox_rx: Mutex::new(inbox_rx),
            handler: RwLock::new(None),
            closed: AtomicBool::new(false),
            accepted: Mutex::new(Vec::new()),
        });
        listener.set_nonblocking(true)?;
        spawn_acceptor(listener, Arc::clone(&port));
        lock(&self.ports).insert(name, port);
        Ok(addr)
    }

    /// Closes a local port: drops its listener, its accepted streams and its
    /// outgoing links, and removes it from the registry.
    pub fn deregister(&self, name: &str) -> Result<(), PortError> {
        let port = PortName::new(name)
            .ok()
            .and_then(|n| lock(&self.ports).remove(&n))
            .ok_or_else(|| PortError::UnknownPort(name.to_string()))?;
        port.close();
        self.registry.remove(&port.addr.name);
        Ok(())
    }

    /// Opens a link so that messages published on `src` reach `dst`.
    pub fn connect(&self, src: &str, dst: &str) -> Result<LinkHandle, PortError> {
        let port = self.local(src)?;
        let dst_name = PortName::new(dst).map_err(|_| PortError::UnknownPort(dst.to_string()))?;
        if self.registry.lookup(dst).is_none() {
            return Err(PortError::UnknownPort(dst.to_string()));
        }
        let link = Arc::new(Link {
            src: port.addr.name.clone(),
            dst: dst_name,
            registry: self.registry.clone(),
            backoff: self.backoff,
            stream: Mutex::new(None),
            generation: AtomicU64::new(0),
            reconnecting: AtomicBool::new(false),
            closed: AtomicBool::new(false),
        });

        let deadline = Instant::now() + self.connect_timeout;
        let mut delays = self.backoff.delays();
        loop {
            if let Some(addr) = self.registry.lookup(dst) {
                if let Ok(stream) = link.dial(&addr) {
                    link.install(stream);
                    break;
                }
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(PortError::ConnectTimeout {
                    src: src.to_string(),
                    dst: dst.to_string(),
                    after: self.connect_timeout,
                });
            }
            let delay = delays.next().unwrap_or(self.backoff.cap);
            thread::sleep(delay.min(deadline - now));
        }
        lock(&port.links).push(Arc::clone(&link));
        Ok(LinkHandle { link })
    }

    /// Sends one message on every link of `src` and returns how many links
    /// accepted the frame. Links that are down count as zero and reconnect in
    /// the background.
    pub fn publish(&self, src: &str, kind: MessageKind, payload: Value) -> Result<usize, PortError> {
        let port = self.local(src)?;
        let _order = lock(&port.publish_lock);
        let seq = port.next_seq.load(Ordering::SeqCst);
        let msg = PortMessage::new(seq, kind, payload);
        let bytes = frame::encode_message(&msg)?;
        port.next_seq.store(seq + 1, Ordering::SeqCst);
        let links = lock(&port.links).clone();
        Ok(links.iter().filter(|link| link.send(&bytes)).count())
    }

    /// Routes deliveries for `name` to `handler` instead of the inbox. The
    /// handler runs on the connection's reader thread and should return
    /// within 100 ms.
    pub fn set_handler<F>(&self, name: &str, handler: F) -> Result<(), PortError>
    where
        F: Fn(Delivery) + Send + Sync + 'static,
    {
        let port = self.local(name)?;
        *port.handler.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(handler));
        Ok(())
    }

    pub fn recv_timeout(&self, name: &str, timeout: Duration) -> Result<Option<Delivery>, PortError> {
        let port = self.local(name)?;
        let rx = lock(&port.inbox_rx);
        Ok(rx.recv_timeout(timeout).ok())
    }

    pub fn try_recv(&self, name: &str) -> Result<Option<Delivery>, PortError> {
        let port = self.local(name)?;
        let rx = lock(&port.inbox_rx);
        Ok(rx.try_recv().ok())
    }

    pub fn links(&self, src: &str) -> Result<Vec<LinkHandle>, PortError> {
        let port = self.local(src)?;
        let links = lock(&port.links);
        Ok(links.iter().map(|l| LinkHandle { link: Arc::clone(l) }).collect())
    }
}

impl Drop for Node {
    fn drop(&mut self) {
        let ports: Vec<_> = lock(&self.ports).drain().collect();
        for (name, port) in ports {
            port.close();
            self.registry.remove(&name);
        }
    }
}

fn spawn_acceptor(listener: TcpListener, port: Arc<LocalPort>) {
    thread::spawn(move || {
        while !port.closed.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    if stream.set_nonblocking(false).is_err() {
                        continue;
                    }
                    let _ = stream.set_nodelay(true);
                    if let Ok(clone) = stream.try_clone() {
                        lock(&port.accepted).push(clone);
                    }
                    debug!(port = %port.addr.name, %peer, "accepted");
                    let port = Arc::clone(&port);
                    thread::spawn(move || read_loop(stream, port));
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
                Err(e) => {
                    warn!(port = %port.addr.name, error = %e, "accept failed");
                    thread::sleep(ACCEPT_POLL);
                }
            }
        }
    });
}

fn read_loop(mut stream: TcpStream, port: Arc<LocalPort>) {
    let from = match frame::read_frame(&mut stream) {
        Ok(Some(Frame::Hello { hello })) => hello,
        Ok(Some(Frame::Message(_))) => {
            warn!(port = %port.addr.name, "peer skipped the handshake");
            return;
        }
        Ok(None) | Err(_) => return,
    };
    loop {
        match frame::read_frame(&mut stream) {
            Ok(Some(Frame::Message(msg))) => port.deliver(Delivery {
                from: from.clone(),
                msg,
            }),
            Ok(Some(Frame::Hello { .. })) => {}
            Ok(None) => break,
            Err(e) => {
                if !port.closed.load(Ordering::SeqCst) {
                    warn!(port = %port.addr.name, %from, error = %e, "dropping link");
                }
                break;
            }
        }
    }
    let _ = stream.shutdown(Shutdown::Both);
}
