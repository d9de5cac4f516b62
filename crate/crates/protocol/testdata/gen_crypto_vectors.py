import hashlib, hmac
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.asymmetric import rsa, padding
from cryptography.hazmat.primitives import hashes, serialization

SALT = b"esafe/kdf/v1"
lines = ["# primitive key input output (hex, '-' = empty)",
         "# independent reference values; regenerate only if an algorithm choice changes"]
h = lambda b: b.hex() if b else "-"
def add(p, k, i, o): lines.append(f"{p} {h(k)} {h(i)} {h(o)}")

# RFC 2202 HMAC-SHA1 test cases 1-3, 6
for k, m in [(b"\x0b"*20, b"Hi There"), (b"Jefe", b"what do ya want for nothing?"),
             (b"\xaa"*20, b"\xdd"*50), (b"\xaa"*80, b"Test Using Larger Than Block-Size Key - Hash Key First")]:
    add("hmac-sha1", k, m, hmac.new(k, m, hashlib.sha1).digest())
k16 = bytes(range(16))
add("hmac-sha1", k16, b"R1 SN0 ID_S TS1", hmac.new(k16, b"R1 SN0 ID_S TS1", hashlib.sha1).digest())
add("hmac-sha256", k16, b"R1 SN0 ID_S TS1", hmac.new(k16, b"R1 SN0 ID_S TS1", hashlib.sha256).digest())
for mat in [b"patient master key", bytes(range(40)), b"a", b"a\x00"]:
    add("pbkdf2-sha1", None, mat, hashlib.pbkdf2_hmac("sha1", len(mat).to_bytes(4, "big") + mat, SALT, 1000, 16))
    add("pbkdf2-sha256", None, mat, hashlib.pbkdf2_hmac("sha256", len(mat).to_bytes(4, "big") + mat, SALT, 1000, 16))
for pt in [b"", b"K_d and K_r", bytes(range(100))]:
    nonce = bytes(range(12))
    add("aes-128-gcm", k16, nonce + pt, nonce + AESGCM(k16).encrypt(nonce, pt, None))

sk = rsa.generate_private_key(public_exponent=65537, key_size=1024)
der = sk.private_bytes(serialization.Encoding.DER, serialization.PrivateFormat.TraditionalOpenSSL, serialization.NoEncryption())
for msg in [b"ID_D|ID_S|ID_I|C2|K_d|CMD|TS6", b""]:
    add("rsa-pkcs1v15-sha256-sign", der, msg, sk.sign(msg, padding.PKCS1v15(), hashes.SHA256()))
nonce = bytes(range(100, 116))
ct = sk.public_key().encrypt(nonce, padding.OAEP(mgf=padding.MGF1(hashes.SHA256()), algorithm=hashes.SHA256(), label=None))
add("rsa-oaep-sha256-decrypt", der, ct, nonce)
open(__import__("os").path.join(__import__("os").path.dirname(__file__), "crypto_vectors.txt"), "w").write("\n".join(lines) + "\n")
